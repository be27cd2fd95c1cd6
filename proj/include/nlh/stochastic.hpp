#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nlh/kernel.hpp"
#include "nlh/operator.hpp"

namespace nlh::mc {

enum class Clock : int { J = 0, R = 1, G = 2 };

inline const char* to_string(Clock c) {
  switch (c) {
    case Clock::J: return "J";
    case Clock::R: return "R";
    case Clock::G: return "G";
  }
  return "?";
}

/// Per-path random stream. Draws are built from raw 64-bit words so results
/// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Exponential with the given rate.
  double exponential(double rate);
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Stream for (seed, stream, path); independent of execution order.
Rng path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path);

struct StepResult {
  Index node = -1;      ///< ambient index after the event
  Clock clock = Clock::J;
  double wait = 0.0;    ///< holding time before the event
  bool moved = false;
  bool killed = false;  ///< accepted jump onto a padded node (Dirichlet)
};

/// The three-clock jump process on grid nodes.
///
/// Each clock fires at rate m*, the largest quadrature row mass of any of the
/// three kernels, so events arrive at rate 3 m* and carry a uniform label.
/// At an event with label V the target y is drawn with probability
/// V(x,y) h^d / m*; the remaining probability keeps the particle in place.
/// The move is accepted only if it respects the phase rule (J: A to A,
/// R: across phases, G: B to B). The resulting generator is exactly the
/// assembled operator L. Neumann chains move among box nodes; Dirichlet
/// chains also propose padded nodes, where the particle is killed.
class JumpChain {
 public:
  JumpChain(const Grid<double>& g, const Vector<double>& chi, const KernelSet<double>& ks, BoundaryCondition bc);

  StepResult step(Index node, Rng& rng) const;

  const Grid<double>& grid() const { return grid_; }
  BoundaryCondition bc() const { return bc_; }
  const Vector<double>& chi() const { return chi_; }
  double clock_rate() const { return clock_rate_; }
  double total_rate() const { return 3.0 * clock_rate_; }
  /// One-jump killing mass per interior node (zeros for Neumann chains).
  const Vector<double>& killing() const { return killing_; }
  double q_hat() const { return killing_.size() ? killing_.minCoeff() : 0.0; }
  /// Largest |V(x,y) - V(y,x)| h^d over the transition rates actually used.
  double rate_asymmetry() const { return asymmetry_; }

  /// Transition-rate matrix among interior nodes implied by the chain; equals L.
  Matrix<double> generator() const;

 private:
  struct Row {
    std::vector<Index> target;  ///< ambient indices
    std::vector<double> cum;    ///< cumulative V h^d
  };

  Grid<double> grid_;
  Vector<double> chi_;
  BoundaryCondition bc_;
  double clock_rate_ = 0.0;
  double asymmetry_ = 0.0;
  Vector<double> killing_;
  std::array<std::vector<Row>, 3> rows_;  ///< per clock, per interior node
};

/// Discrete q_n^inf: smallest one-jump killing probability over box nodes.
double q_inf(const Grid<double>& g, const Vector<double>& chi, const KernelSet<double>& ks);

struct ClockDraw {
  double wait = 0.0;
  Clock clock = Clock::J;
};

/// Minimum of three independent Exp(rate) clocks and the index of the winner.
ClockDraw sample_clocks_direct(double rate, Rng& rng);
/// One Exp(3 rate) waiting time and a uniform label.
ClockDraw sample_clocks_shortcut(double rate, Rng& rng);

struct McConfig {
  int paths = 10000;
  std::uint64_t seed = 1;
  double horizon = 0.0;        ///< Neumann: fixed horizon T; 0 selects it adaptively
  double horizon_max = 5000.0;
  int pilot_paths = 400;
  long long max_jumps = 0;     ///< Dirichlet cap; 0 means ceil(50 * total rate / q_hat)
  std::vector<Index> start_nodes;  ///< interior indices
  std::string dump_path;       ///< optional raw per-path CSV
};

struct StartStats {
  Index start = 0;           ///< interior index
  double estimate = 0.0;
  double std_error = 0.0;
  double mean_jumps = 0.0;
  double mean_exit_time = 0.0;  ///< Dirichlet
  double exit_time_stderr = 0.0;
  double rejection_fraction = 0.0;
  double capped_fraction = 0.0;
  long long capped = 0;
  int paths_used = 0;
  double horizon = 0.0;      ///< Neumann truncation time
  double tail_factor = 0.0;  ///< fitted tail / projected stderr (Neumann)
};

struct PathStats {
  std::vector<StartStats> starts;
  double max_capped_fraction() const;
};

/// u(x) = -int_0^T E^x f(Y_t) dt for a mean-zero interior field f.
PathStats estimate_u_neumann(const JumpChain& chain, const Vector<double>& f, const McConfig& cfg);
/// u(x) = -E^x int_0^s f(Z_t) dt, s the killing time.
PathStats estimate_u_dirichlet(const JumpChain& chain, const Vector<double>& f, const McConfig& cfg);

struct InvariantMeasureReport {
  double tv = 0.0;
  double threshold = 0.0;
  bool passed = false;
  int paths = 0;
  long long steps = 0;  ///< events per path
  Index nodes = 0;
};

/// Runs `paths` independent Neumann paths of `steps` events from `start`
/// (interior index) and compares the terminal histogram with the uniform
/// measure in total variation; threshold 5 sqrt(nodes / paths).
InvariantMeasureReport invariant_measure_check(const JumpChain& chain, Index start, int paths, long long steps,
                                               std::uint64_t seed);

struct GeneratorCheck {
  double max_z = 0.0;   ///< largest |rate * mean increment - L phi| / (rate * stderr)
  int comparisons = 0;
  bool passed = false;
};

/// Compares rate * E[phi(Y_1) - phi(x)] with (L phi)(x) at the given interior
/// nodes for every column of `phis` (interior fields, zero off the box).
GeneratorCheck generator_consistency(const JumpChain& chain, const OperatorMatrix<double>& L,
                                     const std::vector<Index>& nodes, const Matrix<double>& phis, int samples,
                                     std::uint64_t seed, double z_limit = 3.0);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Pearson chi-square of observed counts against expected probabilities.
TestResult chi_square_gof(const std::vector<long long>& counts, const std::vector<double>& probs);
/// Pearson chi-square homogeneity test for two rows of category counts.
TestResult chi_square_two_sample(const std::vector<long long>& a, const std::vector<long long>& b);

struct ClockEquivalence {
  TestResult waits;
  TestResult labels;
  bool passed = false;
};

ClockEquivalence clock_equivalence(double rate, int draws, std::uint64_t seed, double level = 1e-3);

}  // namespace nlh::mc
