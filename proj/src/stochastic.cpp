#include "nlh/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <boost/math/distributions/chi_squared.hpp>

#include "nlh/parallel.hpp"
#include "nlh/partition.hpp"

namespace nlh::mc {

namespace {

// Compensated summation; the reduction order is fixed by the caller.
struct Kahan {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double y = v - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

bool gate(Clock c, double chi_x, double chi_y) {
  switch (c) {
    case Clock::J: return chi_x == 1.0 && chi_y == 1.0;
    case Clock::R: return chi_x != chi_y;
    case Clock::G: return chi_x == 0.0 && chi_y == 0.0;
  }
  return false;
}

const Kernel<double>& kernel_for(const KernelSet<double>& ks, int c) {
  return c == 0 ? ks.J : (c == 1 ? ks.R : ks.G);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  Kahan s;
  for (double x : v) s.add(x);
  r.mean = s.sum / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  Kahan q;
  for (double x : v) q.add((x - r.mean) * (x - r.mean));
  r.se = std::sqrt(q.sum / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

void check_paths(const McConfig& cfg) {
  if (cfg.paths < 100) throw PreconditionError("Monte Carlo estimates need at least 100 paths");
}

std::vector<Index> starts_of(const JumpChain& chain, const McConfig& cfg) {
  if (cfg.start_nodes.empty()) throw PreconditionError("Monte Carlo run needs at least one start node");
  for (Index s : cfg.start_nodes)
    if (s < 0 || s >= chain.grid().interior_size())
      throw PreconditionError("start node " + std::to_string(s) + " is not an interior node");
  return cfg.start_nodes;
}

struct PathOut {
  double integral = 0.0;
  double time = 0.0;
  long long jumps = 0;
  long long rejected = 0;
  bool capped = false;
};

PathOut run_neumann(const JumpChain& chain, const Vector<double>& f_amb, Index start, double T, Rng& rng,
                    double window, std::vector<double>* windows) {
  PathOut out;
  Index node = start;
  double t = 0.0;
  while (true) {
    const StepResult s = chain.step(node, rng);
    const double t1 = t + s.wait;
    const double end = std::min(t1, T);
    const double fv = f_amb[node];
    out.integral += fv * (end - t);
    if (windows) {
      for (auto k = static_cast<std::size_t>(t / window); k < windows->size() && double(k) * window < end; ++k) {
        const double seg = std::min(end, double(k + 1) * window) - std::max(t, double(k) * window);
        if (seg > 0) (*windows)[k] += fv * seg;
      }
    }
    if (t1 >= T) break;
    t = t1;
    ++out.jumps;
    if (!s.moved) ++out.rejected;
    node = s.node;
  }
  out.time = T;
  return out;
}

PathOut run_dirichlet(const JumpChain& chain, const Vector<double>& f_amb, Index start, long long cap, Rng& rng) {
  PathOut out;
  Index node = start;
  while (out.jumps < cap) {
    const StepResult s = chain.step(node, rng);
    out.integral += f_amb[node] * s.wait;
    out.time += s.wait;
    ++out.jumps;
    if (s.killed) return out;
    if (!s.moved) ++out.rejected;
    node = s.node;
  }
  out.capped = true;
  return out;
}

constexpr std::uint64_t pilot_stream = 1ULL << 40;

struct Pilot {
  std::vector<double> a;   ///< window means of int f(Y_t) dt
  std::vector<double> se;
  std::vector<int> sig;    ///< windows with |a| > 2 se
  double total_se = 0.0;   ///< stderr of the whole pilot integral
  int paths = 0;
};

// Pilot paths from one start; the horizon doubles while the last quarter of
// the windows still carries a significant signal.
Pilot run_pilot(const JumpChain& chain, const Vector<double>& f_amb, Index start_amb, Index stream, double dt,
                const McConfig& cfg) {
  Pilot pl;
  pl.paths = std::max(2, std::min(cfg.pilot_paths, cfg.paths));
  double H = 32.0 * dt;
  while (true) {
    const auto K = static_cast<std::size_t>(std::llround(H / dt));
    const auto P0 = static_cast<std::size_t>(pl.paths);
    std::vector<std::vector<double>> win(P0, std::vector<double>(K, 0.0));
    std::vector<double> totals(P0);
    parallel_for(0, pl.paths, [&](Index p) {
      Rng rng = path_rng(cfg.seed, pilot_stream + static_cast<std::uint64_t>(stream), static_cast<std::uint64_t>(p));
      const auto q = static_cast<std::size_t>(p);
      totals[q] = run_neumann(chain, f_amb, start_amb, H, rng, dt, &win[q]).integral;
    });
    pl.a.assign(K, 0.0);
    pl.se.assign(K, 0.0);
    std::vector<double> col(P0);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t p = 0; p < P0; ++p) col[p] = win[p][k];
      const MeanSe ms = mean_se(col);
      pl.a[k] = ms.mean;
      pl.se[k] = ms.se;
    }
    pl.total_se = mean_se(totals).se;
    pl.sig.clear();
    for (std::size_t k = 0; k < K; ++k)
      if (pl.a[k] != 0.0 && std::abs(pl.a[k]) > 2.0 * pl.se[k]) pl.sig.push_back(static_cast<int>(k));
    const int last = pl.sig.empty() ? -1 : pl.sig.back();
    if (last < static_cast<int>(3 * K / 4) || 2.0 * H > cfg.horizon_max) break;
    H *= 2.0;
  }
  return pl;
}

// Log-linear fit of |a_k| over the later half of the significant windows;
// returns the decay per window (positive) or 0 when no decay is measurable.
double fit_decay(const Pilot& pl) {
  if (pl.sig.size() < 3) return 0.0;
  const int last = pl.sig.back();
  std::vector<int> use;
  for (int k : pl.sig)
    if (k >= last / 2) use.push_back(k);
  if (use.size() < 3) use = pl.sig;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k : use) {
    const double y = std::log(std::abs(pl.a[static_cast<std::size_t>(k)]));
    sx += k;
    sy += y;
    sxx += double(k) * k;
    sxy += k * y;
  }
  const double n = double(use.size());
  const double den = n * sxx - sx * sx;
  if (!(den > 0)) return 0.0;
  const double slope = (n * sxy - sx * sy) / den;
  return slope < 0 ? -slope : 0.0;
}

struct Horizon {
  double T = 0.0;
  double tail_factor = 0.0;
};

// The decay rate is shared by all starts (slowest fitted rate); each start
// bounds its tail by the envelope |a| + 2 se at its last significant window,
// and T grows until that tail is below 10% of the stderr expected at the full
// path count.
std::vector<Horizon> choose_horizons(const JumpChain& chain, const Vector<double>& f_amb,
                                     const std::vector<Index>& starts, const McConfig& cfg) {
  const Grid<double>& g = chain.grid();
  const double dt = 1.0 / chain.clock_rate();
  std::vector<Pilot> pilots;
  double rate = std::numeric_limits<double>::infinity();
  for (Index s : starts) {
    pilots.push_back(run_pilot(chain, f_amb, g.ambient_index(s), s, dt, cfg));
    const double r = fit_decay(pilots.back());
    if (r > 0) rate = std::min(rate, r);
  }
  std::vector<Horizon> out(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const Pilot& pl = pilots[i];
    Horizon& h = out[i];
    const double target = 0.1 * pl.total_se * std::sqrt(double(pl.paths) / double(cfg.paths));
    if (pl.sig.empty() && pl.total_se == 0.0) {
      h.T = 32.0 * dt;  // f vanishes along every pilot path
      continue;
    }
    if (!std::isfinite(rate)) {
      h.T = cfg.horizon_max;
      h.tail_factor = std::numeric_limits<double>::infinity();
      continue;
    }
    const int ref = pl.sig.empty() ? 0 : pl.sig.back();
    const double amp = std::abs(pl.a[static_cast<std::size_t>(ref)]) + 2.0 * pl.se[static_cast<std::size_t>(ref)];
    const double q = std::exp(-rate);
    auto tail = [&](double k) { return amp * std::exp(-rate * (k - ref)) / (1.0 - q); };
    double k_end = ref + 1;
    if (target > 0.0 && tail(k_end) > target) k_end = std::ceil(ref + std::log(amp / (target * (1.0 - q))) / rate);
    h.T = std::min(cfg.horizon_max, k_end * dt);
    h.tail_factor = target > 0.0 ? 0.1 * tail(h.T / dt) / target : 0.0;
  }
  return out;
}

void dump_paths(std::ofstream* out, Index start, const std::vector<PathOut>& res) {
  if (!out) return;
  for (std::size_t p = 0; p < res.size(); ++p)
    *out << p << ',' << start << ',' << res[p].time << ',' << res[p].integral << (res[p].capped ? ",1" : ",0")
         << '\n';
}

std::unique_ptr<std::ofstream> open_dump(const McConfig& cfg) {
  if (cfg.dump_path.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(cfg.dump_path);
  if (!*out) throw Error("cannot open " + cfg.dump_path + " for writing");
  out->precision(17);
  *out << "path,start,exit_time,integral,capped\n";
  return out;
}

}  // namespace

double Rng::exponential(double rate) {
  // 1 - u lies in (0, 1], so the logarithm is finite.
  return -std::log1p(-uniform()) / rate;
}

Rng path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) {
  return Rng(mix64(mix64(seed) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL) ^
                   mix64(~path)));
}

JumpChain::JumpChain(const Grid<double>& g, const Vector<double>& chi, const KernelSet<double>& ks,
                     BoundaryCondition bc)
    : grid_(g), chi_(chi), bc_(bc) {
  detail::check_indicator(g, chi);
  detail::check_kernels(g, ks);
  if (bc == BoundaryCondition::dirichlet) {
    if (!g.padded()) throw PreconditionError("Dirichlet chains need a padded grid");
    detail::check_padding(g, ks);
  }
  const double w = g.weight();
  const Index N = g.interior_size();
  std::vector<Index> targets;
  if (bc == BoundaryCondition::neumann) {
    targets = g.interior_nodes();
  } else {
    targets.resize(static_cast<std::size_t>(g.size()));
    for (Index b = 0; b < g.size(); ++b) targets[static_cast<std::size_t>(b)] = b;
  }
  for (int c = 0; c < 3; ++c) {
    const Kernel<double>& k = kernel_for(ks, c);
    auto& rows = rows_[static_cast<std::size_t>(c)];
    rows.resize(static_cast<std::size_t>(N));
    parallel_for(0, N, [&](Index i) {
      const Index a = g.ambient_index(i);
      Row& row = rows[static_cast<std::size_t>(i)];
      double acc = 0.0;
      for (Index b : targets) {
        if (b == a) continue;
        const double v = k(g, a, b) * w;
        if (v < 0.0) throw PreconditionError("jump rates must be nonnegative");
        if (v == 0.0) continue;
        acc += v;
        row.target.push_back(b);
        row.cum.push_back(acc);
      }
    });
    for (const Row& row : rows)
      if (!row.cum.empty()) clock_rate_ = std::max(clock_rate_, row.cum.back());
  }
  if (!(clock_rate_ > 0.0)) throw SingularError("all jump rates vanish");

  killing_ = Vector<double>::Zero(bc == BoundaryCondition::dirichlet ? N : 0);
  if (bc == BoundaryCondition::dirichlet) {
    for (int c = 0; c < 3; ++c)
      for (Index i = 0; i < N; ++i) {
        const Row& row = rows_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        const double cx = chi_[g.ambient_index(i)];
        double prev = 0.0;
        for (std::size_t t = 0; t < row.target.size(); ++t) {
          const Index b = row.target[t];
          if (!g.is_interior(b) && gate(static_cast<Clock>(c), cx, chi_[b])) killing_[i] += row.cum[t] - prev;
          prev = row.cum[t];
        }
      }
  }
  const Matrix<double> Q = generator();
  asymmetry_ = (Q - Q.transpose()).cwiseAbs().maxCoeff();
}

StepResult JumpChain::step(Index node, Rng& rng) const {
  StepResult s;
  s.wait = rng.exponential(total_rate());
  const int c = std::min(2, static_cast<int>(3.0 * rng.uniform()));
  s.clock = static_cast<Clock>(c);
  s.node = node;
  const double r = rng.uniform() * clock_rate_;
  const Index i = grid_.interior_index(node);
  const Row& row = rows_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
  if (row.cum.empty() || r >= row.cum.back()) return s;
  const auto pos = static_cast<std::size_t>(std::upper_bound(row.cum.begin(), row.cum.end(), r) - row.cum.begin());
  const Index b = row.target[pos];
  if (!gate(s.clock, chi_[node], chi_[b])) return s;
  s.node = b;
  s.moved = true;
  s.killed = !grid_.is_interior(b);
  return s;
}

Matrix<double> JumpChain::generator() const {
  const Index N = grid_.interior_size();
  Matrix<double> Q = Matrix<double>::Zero(N, N);
  for (int c = 0; c < 3; ++c)
    for (Index i = 0; i < N; ++i) {
      const Row& row = rows_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
      const double cx = chi_[grid_.ambient_index(i)];
      double prev = 0.0;
      for (std::size_t t = 0; t < row.target.size(); ++t) {
        const Index b = row.target[t];
        const double rate = row.cum[t] - prev;
        prev = row.cum[t];
        if (!gate(static_cast<Clock>(c), cx, chi_[b])) continue;
        const Index j = grid_.interior_index(b);
        if (j >= 0) Q(i, j) += rate;
        Q(i, i) -= rate;
      }
    }
  return Q;
}

double q_inf(const Grid<double>& g, const Vector<double>& chi, const KernelSet<double>& ks) {
  if (!g.padded()) return 0.0;
  return killing_mass(g, chi, ks).minCoeff();
}

ClockDraw sample_clocks_direct(double rate, Rng& rng) {
  ClockDraw d;
  d.wait = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 3; ++c) {
    const double t = rng.exponential(rate);
    if (t < d.wait) {
      d.wait = t;
      d.clock = static_cast<Clock>(c);
    }
  }
  return d;
}

ClockDraw sample_clocks_shortcut(double rate, Rng& rng) {
  ClockDraw d;
  d.wait = rng.exponential(3.0 * rate);
  d.clock = static_cast<Clock>(std::min(2, static_cast<int>(3.0 * rng.uniform())));
  return d;
}

double PathStats::max_capped_fraction() const {
  double m = 0.0;
  for (const auto& s : starts) m = std::max(m, s.capped_fraction);
  return m;
}

PathStats estimate_u_neumann(const JumpChain& chain, const Vector<double>& f, const McConfig& cfg) {
  if (chain.bc() != BoundaryCondition::neumann) throw PreconditionError("estimate_u_neumann needs a Neumann chain");
  check_paths(cfg);
  const Grid<double>& g = chain.grid();
  g.check_interior(f);
  if (std::abs(f.mean()) > 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff()))
    throw PreconditionError("Neumann Monte Carlo needs mean-zero data");
  if (chain.rate_asymmetry() > 1e-12)
    throw PreconditionError(
        "Neumann Monte Carlo needs symmetric jump rates: with asymmetric rates the invariant measure is not "
        "uniform and the time integral of E f(Y_t) diverges");
  const Vector<double> f_amb = g.extend_by_zero(f);
  auto dump = open_dump(cfg);
  const std::vector<Index> starts = starts_of(chain, cfg);
  std::vector<Horizon> horizons(starts.size());
  if (cfg.horizon > 0.0) {
    for (Horizon& h : horizons) h.T = cfg.horizon;
  } else {
    horizons = choose_horizons(chain, f_amb, starts, cfg);
  }
  PathStats stats;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    const Index start = starts[si];
    const Index a = g.ambient_index(start);
    StartStats st;
    st.start = start;
    const Horizon hz = horizons[si];
    st.horizon = hz.T;
    st.tail_factor = hz.tail_factor;
    std::vector<PathOut> res(static_cast<std::size_t>(cfg.paths));
    parallel_for(0, cfg.paths, [&](Index p) {
      Rng rng = path_rng(cfg.seed, static_cast<std::uint64_t>(start), static_cast<std::uint64_t>(p));
      res[static_cast<std::size_t>(p)] = run_neumann(chain, f_amb, a, hz.T, rng, 1.0, nullptr);
    });
    std::vector<double> vals(res.size());
    Kahan jumps, rej;
    for (std::size_t p = 0; p < res.size(); ++p) {
      vals[p] = -res[p].integral;
      jumps.add(double(res[p].jumps));
      rej.add(double(res[p].rejected));
    }
    const MeanSe ms = mean_se(vals);
    st.estimate = ms.mean;
    st.std_error = ms.se;
    st.mean_jumps = jumps.sum / double(res.size());
    st.rejection_fraction = jumps.sum > 0 ? rej.sum / jumps.sum : 0.0;
    st.paths_used = cfg.paths;
    dump_paths(dump.get(), start, res);
    stats.starts.push_back(st);
  }
  return stats;
}

PathStats estimate_u_dirichlet(const JumpChain& chain, const Vector<double>& f, const McConfig& cfg) {
  if (chain.bc() != BoundaryCondition::dirichlet)
    throw PreconditionError("estimate_u_dirichlet needs a Dirichlet chain");
  check_paths(cfg);
  const Grid<double>& g = chain.grid();
  g.check_interior(f);
  const double qhat = chain.q_hat();
  if (!(qhat > 0.0))
    throw PreconditionError(
        "q_inf = 0: some box node cannot leave the box in one jump; escape through several jumps is not "
        "implemented, so the Dirichlet representation is refused");
  const long long cap =
      cfg.max_jumps > 0 ? cfg.max_jumps : static_cast<long long>(std::ceil(50.0 * chain.total_rate() / qhat));
  const Vector<double> f_amb = g.extend_by_zero(f);
  auto dump = open_dump(cfg);
  PathStats stats;
  for (Index start : starts_of(chain, cfg)) {
    const Index a = g.ambient_index(start);
    std::vector<PathOut> res(static_cast<std::size_t>(cfg.paths));
    parallel_for(0, cfg.paths, [&](Index p) {
      Rng rng = path_rng(cfg.seed, static_cast<std::uint64_t>(start), static_cast<std::uint64_t>(p));
      res[static_cast<std::size_t>(p)] = run_dirichlet(chain, f_amb, a, cap, rng);
    });
    StartStats st;
    st.start = start;
    std::vector<double> vals, times;
    Kahan jumps, rej;
    for (const PathOut& r : res) {
      jumps.add(double(r.jumps));
      rej.add(double(r.rejected));
      if (r.capped) {
        ++st.capped;
        continue;
      }
      vals.push_back(-r.integral);
      times.push_back(r.time);
    }
    const MeanSe ms = mean_se(vals);
    const MeanSe mt = mean_se(times);
    st.estimate = ms.mean;
    st.std_error = ms.se;
    st.mean_exit_time = mt.mean;
    st.exit_time_stderr = mt.se;
    st.mean_jumps = jumps.sum / double(res.size());
    st.rejection_fraction = jumps.sum > 0 ? rej.sum / jumps.sum : 0.0;
    st.capped_fraction = double(st.capped) / double(res.size());
    st.paths_used = static_cast<int>(vals.size());
    dump_paths(dump.get(), start, res);
    stats.starts.push_back(st);
  }
  return stats;
}

InvariantMeasureReport invariant_measure_check(const JumpChain& chain, Index start, int paths, long long steps,
                                               std::uint64_t seed) {
  if (chain.bc() != BoundaryCondition::neumann) throw PreconditionError("invariant measure check needs a Neumann chain");
  if (paths < 1 || steps < 0) throw PreconditionError("invariant measure check needs paths >= 1 and steps >= 0");
  const Grid<double>& g = chain.grid();
  if (start < 0 || start >= g.interior_size()) throw PreconditionError("start node is not an interior node");
  std::vector<Index> terminal(static_cast<std::size_t>(paths));
  parallel_for(0, paths, [&](Index p) {
    Rng rng = path_rng(seed, 7, static_cast<std::uint64_t>(p));
    Index node = g.ambient_index(start);
    for (long long s = 0; s < steps; ++s) node = chain.step(node, rng).node;
    terminal[static_cast<std::size_t>(p)] = g.interior_index(node);
  });
  std::vector<long long> counts(static_cast<std::size_t>(g.interior_size()), 0);
  for (Index j : terminal) ++counts[static_cast<std::size_t>(j)];
  InvariantMeasureReport r;
  r.paths = paths;
  r.steps = steps;
  r.nodes = g.interior_size();
  const double u = 1.0 / double(r.nodes);
  Kahan tv;
  for (long long c : counts) tv.add(std::abs(double(c) / paths - u));
  r.tv = 0.5 * tv.sum;
  r.threshold = 5.0 * std::sqrt(double(r.nodes)) / std::sqrt(double(paths));
  r.passed = r.tv < r.threshold;
  return r;
}

GeneratorCheck generator_consistency(const JumpChain& chain, const OperatorMatrix<double>& L,
                                     const std::vector<Index>& nodes, const Matrix<double>& phis, int samples,
                                     std::uint64_t seed, double z_limit) {
  const Grid<double>& g = chain.grid();
  if (phis.rows() != g.interior_size() || L.size() != g.interior_size())
    throw PreconditionError("generator check: sizes do not match the chain");
  if (samples < 2) throw PreconditionError("generator check needs at least 2 samples");
  const Matrix<double> Lphi = L.entries * phis;
  const Index K = phis.cols();
  // Ambient copies of the test functions; zero on padded nodes.
  Matrix<double> amb = Matrix<double>::Zero(g.size(), K);
  for (Index i = 0; i < g.interior_size(); ++i) amb.row(g.ambient_index(i)) = phis.row(i);

  std::vector<double> z(nodes.size() * static_cast<std::size_t>(K), 0.0);
  parallel_for(0, static_cast<Index>(nodes.size()), [&](Index t) {
    const Index i = nodes[static_cast<std::size_t>(t)];
    if (i < 0 || i >= g.interior_size()) throw PreconditionError("generator check: node is not interior");
    const Index a = g.ambient_index(i);
    Rng rng = path_rng(seed, 11 + static_cast<std::uint64_t>(i), 0);
    std::vector<Kahan> s(static_cast<std::size_t>(K)), q(static_cast<std::size_t>(K));
    for (int n = 0; n < samples; ++n) {
      const Index b = chain.step(a, rng).node;
      for (Index k = 0; k < K; ++k) {
        const double d = amb(b, k) - amb(a, k);
        s[static_cast<std::size_t>(k)].add(d);
        q[static_cast<std::size_t>(k)].add(d * d);
      }
    }
    for (Index k = 0; k < K; ++k) {
      const double mean = s[static_cast<std::size_t>(k)].sum / samples;
      const double var = std::max(0.0, (q[static_cast<std::size_t>(k)].sum - samples * mean * mean) / (samples - 1));
      const double se = std::sqrt(var / samples) * chain.total_rate();
      const double diff = std::abs(mean * chain.total_rate() - Lphi(i, k));
      z[static_cast<std::size_t>(t * K + k)] = se > 0 ? diff / se : (diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
    }
  });
  GeneratorCheck r;
  r.comparisons = static_cast<int>(z.size());
  for (double v : z) r.max_z = std::max(r.max_z, v);
  r.passed = r.max_z <= z_limit;
  return r;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw PreconditionError("KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

TestResult chi_square_gof(const std::vector<long long>& counts, const std::vector<double>& probs) {
  if (counts.size() != probs.size() || counts.size() < 2) throw PreconditionError("chi-square: bad category count");
  double n = 0.0;
  for (long long c : counts) n += double(c);
  TestResult r;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = n * probs[k];
    if (!(e > 0)) throw PreconditionError("chi-square: expected count must be positive");
    r.statistic += (double(counts[k]) - e) * (double(counts[k]) - e) / e;
  }
  boost::math::chi_squared dist(double(counts.size() - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

TestResult chi_square_two_sample(const std::vector<long long>& a, const std::vector<long long>& b) {
  if (a.size() != b.size() || a.size() < 2) throw PreconditionError("chi-square: bad category count");
  double na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    na += double(a[k]);
    nb += double(b[k]);
  }
  const double n = na + nb;
  TestResult r;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double col = double(a[k] + b[k]);
    if (!(col > 0)) throw PreconditionError("chi-square: empty category");
    const double ea = na * col / n, eb = nb * col / n;
    r.statistic += (double(a[k]) - ea) * (double(a[k]) - ea) / ea + (double(b[k]) - eb) * (double(b[k]) - eb) / eb;
  }
  boost::math::chi_squared dist(double(a.size() - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

ClockEquivalence clock_equivalence(double rate, int draws, std::uint64_t seed, double level) {
  if (draws < 10) throw PreconditionError("clock equivalence needs at least 10 draws");
  Rng direct = path_rng(seed, 101, 0);
  Rng shortcut = path_rng(seed, 102, 0);
  std::vector<double> wa(static_cast<std::size_t>(draws)), wb(static_cast<std::size_t>(draws));
  std::vector<long long> la(3, 0), lb(3, 0);
  for (int n = 0; n < draws; ++n) {
    const ClockDraw d = sample_clocks_direct(rate, direct);
    const ClockDraw s = sample_clocks_shortcut(rate, shortcut);
    wa[static_cast<std::size_t>(n)] = d.wait;
    wb[static_cast<std::size_t>(n)] = s.wait;
    ++la[static_cast<std::size_t>(d.clock)];
    ++lb[static_cast<std::size_t>(s.clock)];
  }
  ClockEquivalence r;
  r.waits = ks_two_sample(std::move(wa), std::move(wb));
  r.labels = chi_square_two_sample(la, lb);
  r.passed = r.waits.p_value >= level && r.labels.p_value >= level;
  return r;
}

}  // namespace nlh::mc
