#include "nlh/harness/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nlh/kernel_io.hpp"
#include "nlh/solve.hpp"
#include "nlh/spectral.hpp"
#include "nlh/stochastic.hpp"

namespace nlh::harness {

namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

constexpr const char* c_kernels = "kernel-hypotheses";
constexpr const char* c_variational = "variational-consistency";
constexpr const char* c_eigen = "eigenvalue-bound";
constexpr const char* c_homog = "homogenization";
constexpr const char* c_extreme = "extreme-cases";
constexpr const char* c_corrector = "corrector";
constexpr const char* c_mc = "monte-carlo";
constexpr const char* c_exit = "exit-times";
constexpr const char* c_invariant = "invariant-measure";
constexpr const char* c_operator = "operator-structure";

class Stopwatch {
 public:
  explicit Stopwatch(Timings* t) : t_(t), last_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    if (t_) t_->stages.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  Timings* t_;
  std::chrono::steady_clock::time_point last_;
};

template <typename Fn>
auto staged(int n, const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(n, stage, e.what());
  }
}

// Column of values read from a one-column CSV with header "value".
Vec read_value_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "value") throw ConfigError(path + ": expected header 'value'");
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(line, &used));
    } catch (const std::exception&) {
      throw ConfigError(path + ": malformed value '" + line + "'");
    }
  }
  return Eigen::Map<Vec>(vals.data(), static_cast<Index>(vals.size()));
}

double ratio(double a, double b) { return b == 0.0 ? (a == 0.0 ? 0.0 : INFINITY) : a / b; }

// Largest ratio between consecutive entries; <= slack means monotone up to slack.
double worst_step(const std::vector<double>& v) {
  double w = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) w = std::max(w, ratio(v[i], v[i - 1]));
  return w;
}

std::string tag(const std::string& base, Index i) { return base + "[" + std::to_string(i) + "]"; }

struct Context {
  const ExperimentSpec& spec;
  Grid<double> grid;
  KernelSet<double> ks;
  PartitionFamily<double> family;
  Vec f;
  double f_mean = 0.0;
  Vec X;  // ambient limit density
  bool symmetric = true;  // false once some kernel is row-normalized over the box
};

Context make_context(const ExperimentSpec& spec) {
  Grid<double> g = make_grid(spec);
  KernelSet<double> ks = make_kernels(spec, g);
  PartitionFamily<double> fam = make_partition(spec, g);
  double fm = 0.0;
  Vec f = make_f(spec, g, &fm);
  Vec X = limit_density(fam, g);
  const bool sym = !(ks.J.has_row_scale() || ks.R.has_row_scale() || ks.G.has_row_scale());
  return Context{spec, std::move(g), std::move(ks), std::move(fam), std::move(f), fm, std::move(X), sym};
}

struct NResult {
  int n = 0;
  Vec chi;
  Vec u;
  double residual = 0.0;
  std::optional<double> multiplier;
  double lambda = 0.0;
  double lambda_residual = 0.0;
  double symmetry = 0.0;
  double row_sum = 0.0;  ///< max |row sum|, Neumann only
};

// Solves the finite-n problem for every n; items run in parallel and the
// results come back in n order.
std::vector<NResult> sweep(const Context& c, bool want_lambda) {
  const auto& ns = c.spec.n_list;
  std::vector<NResult> out(ns.size());
  SolveOptions so;
  so.tolerance = c.spec.tol.residual;
  so.mean_tolerance = c.spec.tol.mean;
  parallel_for(0, static_cast<Index>(ns.size()), [&](Index k) {
    const int n = ns[static_cast<std::size_t>(k)];
    NResult& r = out[static_cast<std::size_t>(k)];
    r.n = n;
    r.chi = staged(n, "partition", [&] { return indicator(c.family, n, c.grid); });
    const auto L = staged(n, "assemble", [&] { return assemble(c.grid, r.chi, c.ks, c.spec.bc, n); });
    if (c.spec.output.dump_matrices) {
      std::filesystem::create_directories(c.spec.output.dir);
      write_matrix_csv((std::filesystem::path(c.spec.output.dir) / ("L_n" + std::to_string(n) + ".csv")).string(), L);
    }
    r.symmetry = (L.entries - L.entries.transpose()).cwiseAbs().maxCoeff();
    if (c.spec.bc == BoundaryCondition::neumann) r.row_sum = L.entries.rowwise().sum().cwiseAbs().maxCoeff();
    const auto s = staged(n, "solve", [&] { return solve(c.grid, L, c.f, so); });
    r.u = s.u;
    r.residual = s.residual;
    r.multiplier = s.multiplier;
    if (want_lambda && c.symmetric) {
      const auto lam = staged(n, "rayleigh", [&] { return min_rayleigh(L); });
      r.lambda = lam.value;
      r.lambda_residual = lam.residual;
    }
  });
  return out;
}

LimitPair<double> limit_pair(const Context& c, const Vec& X, LimitOperator<double>* keep = nullptr) {
  SolveOptions so;
  so.tolerance = c.spec.tol.residual;
  so.mean_tolerance = c.spec.tol.mean;
  auto M = staged(0, "limit-assemble", [&] { return assemble_limit_system(c.grid, X, c.ks, c.spec.bc); });
  auto p = staged(0, "limit-solve", [&] { return solve_limit_pair(c.grid, M, c.f, so); });
  if (keep) *keep = std::move(M);
  return p;
}

// Adds the limit-system checks (residuals, constraint, nullspace, symmetry).
void limit_rows(const Context& c, const LimitOperator<double>& M, const LimitPair<double>& p, MetricTable& t) {
  const Tolerances& tol = c.spec.tol;
  t.at_most(0, "limit.residual_A", p.residual_a, tol.residual);
  t.at_most(0, "limit.residual_B", p.residual_b, tol.residual);
  const double comb = combined_residual(c.grid, M, p, c.f);
  t.at_most(0, "limit.combined_residual", comb, tol.residual);
  t.at_most(0, "limit.combined_vs_parts", comb - (p.residual_a + p.residual_b), 1e-12);
  const Mat S = M.symmetrized();
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, S.cwiseAbs().maxCoeff());
  if (c.symmetric) t.at_most(0, "limit.block_symmetry", asym, tol.symmetry);
  else t.info(0, "limit.block_symmetry", asym);
  if (c.spec.bc == BoundaryCondition::neumann) {
    t.at_most(0, "limit.constraint", std::abs(p.constraint_value), tol.mean);
    t.at_most(0, "limit.nullspace", (M.entries * M.null_direction()).cwiseAbs().maxCoeff(), tol.nullspace);
  }
  t.info(0, "limit.norm_uA", l2_norm(c.grid, p.uA));
  t.info(0, "limit.norm_uB", l2_norm(c.grid, p.uB));
}

Vec random_field(mc::Rng& rng, Index n) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = 2.0 * rng.uniform() - 1.0;
  return v;
}

// Energy minimality and finite-difference stationarity at the solver output.
void energy_rows(const Context& c, const NResult& r, MetricTable& t) {
  const int K = c.spec.perturbations;
  if (K == 0) return;
  mc::Rng rng = mc::path_rng(c.spec.seed, 0xE0E0, static_cast<std::uint64_t>(r.n));
  const auto bc = c.spec.bc;
  const double e0 = energy(c.grid, r.chi, c.ks, r.u, c.f, bc);
  double min_increase = INFINITY;
  double max_grad = 0.0;
  const double eps[] = {1e-1, -1e-1, 1e-3, -1e-3};
  for (int k = 0; k < K; ++k) {
    Vec v = random_field(rng, c.grid.interior_size());
    if (bc == BoundaryCondition::neumann) v.array() -= v.mean();
    v /= l2_norm(c.grid, v);
    const double e = eps[k % 4];
    const double inc = energy(c.grid, r.chi, c.ks, Vec(r.u + e * v), c.f, bc) - e0;
    min_increase = std::min(min_increase, inc / (e * e));
    const double h = 1e-3;
    const double d = (energy(c.grid, r.chi, c.ks, Vec(r.u + h * v), c.f, bc) -
                      energy(c.grid, r.chi, c.ks, Vec(r.u - h * v), c.f, bc)) /
                     (2 * h);
    max_grad = std::max(max_grad, std::abs(d));
  }
  t.add(r.n, "energy.min_increase_over_eps2", min_increase, 0.0, min_increase > 0.0);
  t.at_most(r.n, "energy.directional_derivative", max_grad, c.spec.tol.gradient);
}

void solve_scenario(const Context& c, Report& rep) {
  const Tolerances& tol = c.spec.tol;
  MetricTable& op = rep.table("operator", c_operator);
  MetricTable& t = rep.table("solve", c_variational);
  if (c.spec.bc == BoundaryCondition::neumann) t.info(0, "f.subtracted_mean", c.f_mean);
  const auto results = sweep(c, true);
  const double fn = l2_norm(c.grid, c.f);
  for (const auto& r : results) {
    if (c.symmetric) op.at_most(r.n, "symmetry", r.symmetry, tol.symmetry);
    else op.info(r.n, "symmetry", r.symmetry);
    if (c.spec.bc == BoundaryCondition::neumann) op.at_most(r.n, "row_sum", r.row_sum, tol.row_sum);
    t.at_most(r.n, "residual", r.residual, tol.residual);
    if (c.spec.bc == BoundaryCondition::neumann) {
      t.at_most(r.n, "mean_u", std::abs(r.u.mean()), tol.mean);
      if (c.symmetric) t.at_most(r.n, "multiplier", std::abs(r.multiplier.value_or(0.0)), tol.multiplier);
      else t.info(r.n, "multiplier", r.multiplier.value_or(0.0));
    } else {
      t.info(r.n, "q_hat", mc::q_inf(c.grid, r.chi, c.ks));
    }
    // Rayleigh quotient and energy describe the symmetric problem only.
    if (!c.symmetric) continue;
    t.info(r.n, "lambda", r.lambda);
    t.at_most(r.n, "apriori_bound_ratio", ratio(l2_norm(c.grid, r.u) * r.lambda, fn), 1.0 + 1e-10);
    energy_rows(c, r, t);
  }
}

void limit_scenario(const Context& c, Report& rep) {
  LimitOperator<double> M;
  const auto p = limit_pair(c, c.X, &M);
  limit_rows(c, M, p, rep.table("limit", c_homog));
}

Vec corrector(const Context& c, const NResult& r, const LimitPair<double>& p, const Vec& X) {
  return staged(r.n, "corrector", [&] {
    return corrector_field(c.grid, r.chi, X, p, c.spec.bc, DensityBounds<double>{c.spec.c0, c.spec.c1});
  });
}

void decay_rows(MetricTable& t, const std::string& name, const std::vector<double>& seq, const Tolerances& tol,
                bool monotone) {
  if (seq.size() < 2) return;
  if (monotone) t.at_most(0, name + ".worst_step_ratio", worst_step(seq), tol.monotone_slack);
  t.at_most(0, name + ".final_over_initial", ratio(seq.back(), seq.front()), tol.decay_ratio);
}

void convergence_scenario(const Context& c, Report& rep, bool gaps) {
  const Tolerances& tol = c.spec.tol;
  LimitOperator<double> M;
  const auto p = limit_pair(c, c.X, &M);
  const auto results = sweep(c, false);
  MetricTable& h = rep.table("homogenization", c_homog);
  MetricTable& k = rep.table("corrector", c_corrector);
  std::vector<double> ga, gb, ce;
  for (const auto& r : results) {
    h.at_most(r.n, "residual", r.residual, tol.residual);
    if (gaps) {
      const Vec chi = c.grid.restrict_to_interior(r.chi);
      const Vec ua = chi.cwiseProduct(r.u);
      const Vec ub = (Vec::Ones(chi.size()) - chi).cwiseProduct(r.u);
      ga.push_back(weak_gap(c.grid, ua, p.uA, c.spec.dictionary_order));
      gb.push_back(weak_gap(c.grid, ub, p.uB, c.spec.dictionary_order));
      h.info(r.n, "weak_gap_A", ga.back());
      h.info(r.n, "weak_gap_B", gb.back());
    }
    ce.push_back(corrector_error(c.grid, r.u, corrector(c, r, p, c.X)));
    k.info(r.n, "corrector_error", ce.back());
  }
  if (gaps) {
    limit_rows(c, M, p, h);
    decay_rows(h, "weak_gap_A", ga, tol, true);
    decay_rows(h, "weak_gap_B", gb, tol, true);
  }
  if (ce.size() >= 2) {
    k.info(0, "corrector_error.worst_step_ratio", worst_step(ce));
    k.at_most(0, "corrector_error.final_over_initial", ratio(ce.back(), ce.front()), tol.decay_ratio);
  }
  if (!gaps) {
    // Contrast: the corrector built from a wrong limit density stays away from u_n.
    const double wrong_theta = c.spec.partition.theta <= 0.5 ? 0.9 : 0.1;
    const Vec Xw = Vec::Constant(c.grid.size(), wrong_theta);
    const auto pw = limit_pair(c, Xw);
    const double ew = corrector_error(c.grid, results.back().u, corrector(c, results.back(), pw, Xw));
    k.info(results.back().n, "wrong_density_error", ew);
    k.at_least(results.back().n, "wrong_density_error_over_error", ratio(ew, ce.back()), 2.0);
  }
}

void extreme_scenario(const Context& c, Report& rep) {
  const Tolerances& tol = c.spec.tol;
  const bool to_zero = c.spec.partition.schedule == FractionSchedule::vanishing;
  const auto p = limit_pair(c, c.X);
  const auto results = sweep(c, false);
  MetricTable& t = rep.table("extreme", c_extreme);
  const Vec& target = to_zero ? p.uB : p.uA;
  const Vec& vanishing = to_zero ? p.uA : p.uB;
  t.at_most(0, to_zero ? "limit.norm_uA" : "limit.norm_uB", l2_norm(c.grid, vanishing), tol.limit_norm);
  std::vector<double> err;
  for (const auto& r : results) {
    t.at_most(r.n, "residual", r.residual, tol.residual);
    t.info(r.n, "phase_A_fraction", mean(c.grid, r.chi));
    err.push_back(l2_norm(c.grid, Vec(r.u - target)));
    t.info(r.n, to_zero ? "strong_error_vs_uB" : "strong_error_vs_uA", err.back());
  }
  decay_rows(t, "strong_error", err, tol, false);
}

void spectral_scenario(const Context& c, Report& rep) {
  const auto results = sweep(c, true);
  MetricTable& t = rep.table("spectral", c_eigen);
  double lo = INFINITY;
  for (const auto& r : results) {
    t.info(r.n, "lambda", r.lambda);
    t.at_most(r.n, "eigen_residual", r.lambda_residual, 1e-8 * std::max(1.0, 2.0 * std::abs(r.lambda) + 2.0));
    lo = std::min(lo, r.lambda);
  }
  t.at_least(0, "min_lambda_over_first", ratio(lo, results.front().lambda), c.spec.tol.lambda_ratio);
  t.add(0, "min_lambda", lo, 0.0, lo > 0.0);
}

mc::McConfig mc_config(const ExperimentSpec& s, int paths) {
  mc::McConfig m;
  m.paths = paths;
  m.seed = s.seed;
  m.horizon = s.mc.horizon;
  m.horizon_max = s.mc.horizon_max;
  m.pilot_paths = s.mc.pilot_paths;
  m.max_jumps = s.mc.max_jumps;
  m.start_nodes = s.mc.start_nodes;
  return m;
}

void mc_scenario(const Context& c, Report& rep, Timings* timings) {
  Stopwatch sw(timings);
  const ExperimentSpec& s = c.spec;
  const Tolerances& tol = s.tol;
  const int n = s.n_list.front();
  const Vec chi = indicator(c.family, n, c.grid);
  const auto L = staged(n, "assemble", [&] { return assemble(c.grid, chi, c.ks, s.bc, n); });
  SolveOptions so;
  so.tolerance = tol.residual;
  const auto oracle = staged(n, "solve", [&] { return solve(c.grid, L, c.f, so); });
  const mc::JumpChain chain = staged(n, "chain", [&] { return mc::JumpChain(c.grid, chi, c.ks, s.bc); });
  sw.lap("mc.setup");
  const bool neumann = s.bc == BoundaryCondition::neumann;

  auto estimate = [&](int paths, const std::string& dump) {
    mc::McConfig m = mc_config(s, paths);
    if (!dump.empty()) m.dump_path = (std::filesystem::path(s.output.dir) / dump).string();
    return staged(n, "monte-carlo", [&] {
      return neumann ? mc::estimate_u_neumann(chain, c.f, m) : mc::estimate_u_dirichlet(chain, c.f, m);
    });
  };
  if (!s.mc.dump.empty()) std::filesystem::create_directories(s.output.dir);
  const mc::PathStats stats = estimate(s.mc.paths, s.mc.dump);
  sw.lap("mc.estimate");

  McTable mt{"mc", c_mc, {}};
  MetricTable& info = rep.table("mc_diagnostics", c_mc);
  for (const auto& st : stats.starts) {
    McRow row;
    row.start = st.start;
    row.estimate = st.estimate;
    row.std_error = st.std_error;
    row.oracle = oracle.u[st.start];
    const double diff = st.estimate - row.oracle;
    row.z = st.std_error > 0 ? diff / st.std_error : (std::abs(diff) <= 1e-12 ? 0.0 : INFINITY);
    row.tol = tol.z;
    row.pass = std::abs(row.z) <= tol.z;
    mt.rows.push_back(row);
    info.info(n, tag("mean_jumps", st.start), st.mean_jumps);
    info.info(n, tag("rejection_fraction", st.start), st.rejection_fraction);
    if (neumann) {
      info.info(n, tag("horizon", st.start), st.horizon);
      info.at_most(n, tag("tail_over_stderr", st.start), st.tail_factor, 0.1 + 1e-12);
    }
  }
  rep.mc_tables.push_back(mt);

  if (!neumann) {
    MetricTable& e = rep.table("exit_times", c_exit);
    const double q = chain.q_hat();
    e.info(n, "q_hat", q);
    for (const auto& st : stats.starts) {
      e.at_most(n, tag("mean_exit_time", st.start), st.mean_exit_time, 1.0 / q + 3.0 * st.exit_time_stderr);
      e.at_most(n, tag("capped_fraction", st.start), st.capped_fraction, tol.capped_fraction);
    }
  }

  if (s.mc.scaling) {
    MetricTable& t = rep.table("stderr_scaling", c_mc);
    double prev = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int paths = s.mc.paths * (1 << (2 * k));
      mc::McConfig m = mc_config(s, paths);
      m.start_nodes = {s.mc.start_nodes.front()};
      m.seed = s.seed + 1000 + static_cast<std::uint64_t>(k);
      // Same horizon for every path count, so only the sample size changes.
      if (neumann) m.horizon = stats.starts.front().horizon;
      const auto st = (neumann ? mc::estimate_u_neumann(chain, c.f, m) : mc::estimate_u_dirichlet(chain, c.f, m))
                          .starts.front();
      t.info(n, "stderr@" + std::to_string(paths), st.std_error);
      if (k > 0) {
        const double r = ratio(prev, st.std_error);
        t.at_least(n, "stderr_ratio@" + std::to_string(paths), r, tol.stderr_ratio_low);
        t.at_most(n, "stderr_ratio@" + std::to_string(paths), r, tol.stderr_ratio_high);
      }
      prev = st.std_error;
    }
    sw.lap("mc.scaling");
  }

  if (s.mc.clock_draws > 0) {
    MetricTable& t = rep.table("clocks", c_mc);
    const auto eq = mc::clock_equivalence(chain.clock_rate(), s.mc.clock_draws, s.seed);
    t.at_least(0, "waiting_time_ks_p", eq.waits.p_value, tol.significance);
    t.at_least(0, "label_chi2_p", eq.labels.p_value, tol.significance);
    sw.lap("mc.clocks");
  }

  if (s.mc.generator_samples > 0) {
    MetricTable& t = rep.table("generator", c_mc);
    mc::Rng rng = mc::path_rng(s.seed, 0x6E6E, 0);
    Mat phis(c.grid.interior_size(), s.mc.generator_functions);
    for (Index k = 0; k < phis.cols(); ++k) phis.col(k) = random_field(rng, phis.rows());
    const auto g = mc::generator_consistency(chain, L, s.mc.start_nodes, phis, s.mc.generator_samples, s.seed, tol.z);
    t.info(n, "comparisons", g.comparisons);
    t.at_most(n, "max_z", g.max_z, tol.z);
    sw.lap("mc.generator");
  }

  if (s.mc.invariant_paths > 0 && neumann) {
    MetricTable& t = rep.table("invariant_measure", c_invariant);
    const auto im = mc::invariant_measure_check(chain, s.mc.start_nodes.front(), s.mc.invariant_paths,
                                                s.mc.invariant_steps, s.seed);
    t.info(n, "total_steps", double(im.paths) * double(im.steps));
    t.at_most(n, "tv_distance", im.tv, im.threshold);
    sw.lap("mc.invariant");
  }
}

// Normalization error at the given resolution for kernel `k` of the spec.
double normalization_error(const ExperimentSpec& spec, const KernelSpec& ksp, Index m) {
  ExperimentSpec s = spec;
  s.grid.m = m;
  s.bc = BoundaryCondition::dirichlet;
  s.J = s.R = s.G = ksp;
  if (ksp.kind == KernelKind::constant || ksp.kind == KernelKind::tabulated) s.grid.pad_cells = Index(0);
  else s.grid.pad_cells.reset();
  const Grid<double> g = make_grid(s);
  const KernelSet<double> ks = make_kernels(s, g);
  return validate_hypotheses(ks.J, g, spec.tol.kernel_normalization).normalization_error;
}

}  // namespace

Grid<double> make_grid(const ExperimentSpec& spec) {
  Index pad = spec.grid.pad_cells.value_or(0);
  if (!spec.grid.pad_cells && spec.bc == BoundaryCondition::dirichlet) {
    double radius = 0.0;
    for (const KernelSpec* k : {&spec.J, &spec.R, &spec.G})
      if (k->kind == KernelKind::tent || k->kind == KernelKind::gaussian_truncated) radius = std::max(radius, k->delta);
    pad = pad_cells_for(radius, spec.grid.m);
  }
  return build_grid<double>(spec.grid.dim, spec.grid.m, pad);
}

KernelSet<double> make_kernels(const ExperimentSpec& spec, const Grid<double>& g) {
  auto base = [&](const KernelSpec& k, KernelLabel label) {
    switch (k.kind) {
      case KernelKind::constant: return Kernel<double>::constant(k.amplitude, g.dim(), label);
      case KernelKind::tent: return Kernel<double>::tent(k.delta, g.dim(), label, k.amplitude);
      case KernelKind::gaussian_truncated:
        return Kernel<double>::gaussian_truncated(k.delta, k.sigma > 0 ? k.sigma : k.delta / 3.0, g.dim(), label,
                                                  k.amplitude);
      case KernelKind::tabulated:
        return load_tabulated_kernel<double>(resolve_path(spec, k.table), g.size(), g.dim(), label,
                                             k.norm_mode.value_or(NormMode::domain));
    }
    throw ConfigError("unknown kernel kind");
  };
  auto one = [&](const KernelSpec& k, KernelLabel label) {
    Kernel<double> v = base(k, label);
    if (!k.norm_mode || *k.norm_mode == v.norm_mode()) return v;
    // Compact kernels asked for domain mode get their rows rescaled to unit mass over the box.
    if (*k.norm_mode == NormMode::domain && k.kind != KernelKind::tabulated) return normalize_on_domain(v, g);
    return v.with_norm_mode(*k.norm_mode);
  };
  return {one(spec.J, KernelLabel::J), one(spec.R, KernelLabel::R), one(spec.G, KernelLabel::G)};
}

PartitionFamily<double> make_partition(const ExperimentSpec& spec, const Grid<double>& g) {
  PartitionFamily<double> p;
  const double theta = spec.partition.theta;
  p.kind = spec.partition.kind;
  p.profile = [theta](const Point<double>&) { return theta; };
  p.schedule = spec.partition.schedule;
  p.seed = spec.partition.seed;
  if (p.kind == PartitionKind::explicit_table) {
    p.explicit_limit = [theta](const Point<double>&) { return theta; };
    for (const auto& [n, file] : spec.partition.tables) {
      Vec v = read_value_column(resolve_path(spec, file));
      if (v.size() != g.size() && v.size() != g.interior_size())
        throw ConfigError(file + ": expected " + std::to_string(g.size()) + " values");
      p.table[n] = v;
    }
  }
  return p;
}

Vec make_f(const ExperimentSpec& spec, const Grid<double>& g, double* subtracted_mean) {
  Vec f;
  const std::string& name = spec.f.name;
  if (name == "linear") {
    f = g.sample_interior([](const auto& x) { return x[0] - 0.5; });
  } else if (name == "cosine") {
    f = g.sample_interior([](const auto& x) { return std::cos(2.0 * std::numbers::pi * x[0]); });
  } else if (name == "constant") {
    f = Vec::Constant(g.interior_size(), spec.f.value);
  } else if (name == "table") {
    f = read_value_column(resolve_path(spec, spec.f.path));
    if (f.size() != g.interior_size())
      throw ConfigError(spec.f.path + ": expected " + std::to_string(g.interior_size()) + " values");
  } else {
    throw ConfigError("unknown f name '" + name + "'");
  }
  double mu = 0.0;
  if (spec.bc == BoundaryCondition::neumann) {
    mu = f.mean();
    f.array() -= mu;
  }
  if (subtracted_mean) *subtracted_mean = mu;
  return f;
}

Report run(const ExperimentSpec& spec, Timings* timings) {
  Stopwatch sw(timings);
  validate(spec);
  Report rep;
  rep.scenario = to_string(spec.scenario);
  rep.config = to_json(spec);
  rep.config.erase("output");
  rep.config["mc"].erase("dump");
  rep.provenance.version = version;
  rep.provenance.scenario = rep.scenario;
  rep.provenance.seed = spec.seed;
  rep.provenance.config_hash = fnv1a_hex(rep.config.dump());
#ifdef __VERSION__
  rep.provenance.compiler = __VERSION__;
#endif
  rep.provenance.eigen = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);

  const Context c = make_context(spec);
  sw.lap("setup");
  switch (spec.scenario) {
    case Scenario::solve_neumann:
    case Scenario::solve_dirichlet: solve_scenario(c, rep); break;
    case Scenario::limit_system: limit_scenario(c, rep); break;
    case Scenario::convergence_study: convergence_scenario(c, rep, true); break;
    case Scenario::corrector_study: convergence_scenario(c, rep, false); break;
    case Scenario::extreme_case: extreme_scenario(c, rep); break;
    case Scenario::mc_verify: mc_scenario(c, rep, timings); break;
    case Scenario::spectral_sweep: spectral_scenario(c, rep); break;
  }
  sw.lap("scenario");
  return rep;
}

Report check_kernels(const ExperimentSpec& spec) {
  Report rep;
  rep.scenario = "kernels-check";
  rep.config = to_json(spec);
  rep.config.erase("output");
  rep.provenance.version = version;
  rep.provenance.scenario = rep.scenario;
  rep.provenance.seed = spec.seed;
  rep.provenance.config_hash = fnv1a_hex(rep.config.dump());
  MetricTable& t = rep.table("kernels", c_kernels);
  const std::pair<const char*, const KernelSpec*> all[] = {{"J", &spec.J}, {"R", &spec.R}, {"G", &spec.G}};
  for (const auto& [name, k] : all) {
    ExperimentSpec s = spec;
    s.J = s.R = s.G = *k;
    s.bc = BoundaryCondition::dirichlet;
    if (k->kind == KernelKind::constant || k->kind == KernelKind::tabulated) s.grid.pad_cells = spec.grid.pad_cells.value_or(0);
    else s.grid.pad_cells.reset();
    const Grid<double> g = make_grid(s);
    const KernelSet<double> ks = make_kernels(s, g);
    const auto v = validate_hypotheses(ks.J, g, spec.tol.kernel_normalization);
    const std::string p = std::string(name) + ".";
    t.at_most(0, p + "negativity", v.negativity, 0.0);
    t.at_most(0, p + "asymmetry", v.asymmetry, 0.0);
    t.add(0, p + "diagonal_min", v.diagonal_min, 0.0, v.diagonal_positive);
    t.at_most(0, p + "normalization_error", v.normalization_error, spec.tol.kernel_normalization);
    t.info(0, p + "positivity_floor", v.positivity_floor);
    t.info(0, p + "positivity_radius", v.positivity_radius);
    if (k->kind != KernelKind::tabulated) {
      const double e1 = normalization_error(spec, *k, spec.grid.m);
      const double e2 = normalization_error(spec, *k, 2 * spec.grid.m);
      // Ratio >= 3 when h halves, unless both errors sit at roundoff.
      const bool exact = std::max(e1, e2) <= 1e-13;
      t.info(0, p + "normalization_error@2m", e2);
      t.add(0, p + "refinement_ratio", exact ? INFINITY : ratio(e1, e2), 3.0, exact || e2 * 3.0 <= e1);
    }
  }
  return rep;
}

}  // namespace nlh::harness
