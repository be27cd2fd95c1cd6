// Acceptance runner: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion ...]   (default: all twelve)

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "nlh/harness/run.hpp"
#include "nlh/operator.hpp"
#include "nlh/solve.hpp"
#include "nlh/spectral.hpp"

namespace fs = std::filesystem;
using namespace nlh;
using namespace nlh::harness;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note("FAILED " + what);
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const fs::path configs = fs::path(NLH_SOURCE_DIR) / "configs";
const fs::path out_root = fs::current_path() / "acceptance_out";

ExperimentSpec load(const std::string& name) { return parse_config((configs / name).string()); }

// Largest or smallest value over rows of the named table whose metric matches
// the glob `pattern`.
double pick(const Report& r, const std::string& table, const char* pattern, bool largest = true) {
  double best = largest ? -INFINITY : INFINITY;
  for (const auto& t : r.tables)
    if (t.name == table)
      for (const auto& row : t.rows)
        if (fnmatch(pattern, row.metric.c_str(), 0) == 0) best = largest ? std::max(best, row.value) : std::min(best, row.value);
  return best;
}

double final_row(const Report& r, const std::string& table, const std::string& metric) {
  double v = NAN;
  int n = -1;
  for (const auto& t : r.tables)
    if (t.name == table)
      for (const auto& row : t.rows)
        if (row.metric == metric && row.n > n) n = row.n, v = row.value;
  return v;
}

// Runs a config and folds its pass/fail rows into the outcome.
Report run_into(Outcome& o, const std::string& name, const std::function<void(ExperimentSpec&)>& edit = {}) {
  ExperimentSpec s = load(name);
  if (edit) edit(s);
  const Report r = run(s);
  int bad = 0;
  std::string first;
  for (const auto& t : r.tables)
    for (const auto& row : t.rows)
      if (!row.pass && bad++ == 0) first = t.name + "/" + row.metric + "@n=" + std::to_string(row.n) + "=" + fmt(row.value);
  for (const auto& t : r.mc_tables)
    for (const auto& row : t.rows)
      if (!row.pass && bad++ == 0) first = t.name + "/z@" + std::to_string(row.start) + "=" + fmt(row.z);
  o.require(bad == 0, name + " (" + std::to_string(bad) + " failing rows, first " + first + ")");
  return r;
}

KernelSet<double> tents() {
  return {Kernel<double>::tent(0.2, 1, KernelLabel::J), Kernel<double>::tent(0.25, 1, KernelLabel::R),
          Kernel<double>::tent(0.3, 1, KernelLabel::G)};
}

KernelSet<double> constants(double r = 1.0) {
  return {Kernel<double>::constant(1.0, 1, KernelLabel::J), Kernel<double>::constant(r, 1, KernelLabel::R),
          Kernel<double>::constant(1.0, 1, KernelLabel::G)};
}

Vector<double> stripes(const Grid<double>& g, int n) {
  return indicator(PartitionFamily<double>::stripes(0.5), n, g);
}

Outcome kernel_hypotheses() {
  Outcome o;
  ExperimentSpec s = parse_config_json(nlohmann::json::parse(R"({
    "scenario": "solve-neumann", "grid": {"m": 64},
    "kernels": {"J": {"kind": "tent", "delta": 0.25},
                "R": {"kind": "gaussian_truncated", "delta": 0.25},
                "G": {"kind": "constant"}}})"));
  const Report r = check_kernels(s);
  o.require(r.all_passed(), "hypothesis rows");
  o.require(pick(r, "kernels", "*.asymmetry") == 0.0, "asymmetry == 0");
  o.require(pick(r, "kernels", "*.negativity") == 0.0, "negativity == 0");
  o.note("max normalization error " + fmt(pick(r, "kernels", "*.normalization_error")));
  o.note("min refinement ratio " + fmt(pick(r, "kernels", "*.refinement_ratio", false)));
  return o;
}

Outcome operator_structure() {
  Outcome o;
  const auto ks = tents();
  const auto g = build_grid(1, 64);
  double sym = 0, rows = 0, ident = 0;
  for (int n : {1, 2, 4, 8}) {
    const auto chi = stripes(g, n);
    const auto L = assemble_neumann(g, chi, ks, n);
    sym = std::max(sym, (L.entries - L.entries.transpose()).cwiseAbs().maxCoeff());
    rows = std::max(rows, L.entries.rowwise().sum().cwiseAbs().maxCoeff());
    for (unsigned k = 0; k < 20; ++k) {
      const Vector<double> u = test::random_vector(g.interior_size(), 1000 * n + k);
      const double lhs = -dirichlet_form(g, L, u, u);
      const double rhs = phi_terms(g, chi, ks, u, BoundaryCondition::neumann).quadratic();
      ident = std::max(ident, std::abs(lhs - rhs) / std::abs(rhs));
    }
  }
  double naive = 0;
  for (auto bc : {BoundaryCondition::neumann, BoundaryCondition::dirichlet}) {
    const auto g8 = build_grid(1, 8, bc == BoundaryCondition::dirichlet ? pad_cells_for(0.3, 8) : 0);
    for (int n : {1, 2, 4, 8}) {
      const auto chi = stripes(g8, n);
      const auto L = assemble(g8, chi, ks, bc, n);
      naive = std::max(naive, (L.entries - test::naive_operator(g8, chi, ks, bc)).cwiseAbs().maxCoeff());
    }
  }
  o.require(sym <= 1e-12, "symmetry " + fmt(sym));
  o.require(rows <= 1e-10, "row sums " + fmt(rows));
  o.require(ident <= 1e-10, "energy identity " + fmt(ident));
  o.require(naive <= 1e-14, "naive assembly " + fmt(naive));
  o.note("symmetry " + fmt(sym) + ", row sums " + fmt(rows) + ", identity rel " + fmt(ident) + ", naive " + fmt(naive));
  return o;
}

Outcome variational() {
  Outcome o;
  double res = 0, grad = 0, incr = INFINITY;
  for (const char* name : {"solve_neumann.json", "solve_dirichlet.json"}) {
    const Report r = run_into(o, name, [](ExperimentSpec& s) { s.perturbations = 100; });
    res = std::max(res, pick(r, "solve", "residual"));
    grad = std::max(grad, pick(r, "solve", "energy.directional_derivative"));
    incr = std::min(incr, pick(r, "solve", "energy.min_increase_over_eps2", false));
  }
  o.require(res <= 1e-10, "residual");
  o.require(incr > 0, "energy increase");
  o.require(grad <= 1e-8, "directional derivative");
  o.note("residual " + fmt(res) + ", min increase/eps^2 " + fmt(incr) + ", directional derivative " + fmt(grad));
  return o;
}

Outcome eigenvalue_bound() {
  Outcome o;
  const auto g = build_grid(1, 64);
  const double lc = min_rayleigh(assemble_neumann(g, stripes(g, 2), constants(), 2)).value;
  o.require(std::abs(lc - 1.0) <= 0.02, "constant-kernel lambda " + fmt(lc));
  const Report r = run_into(o, "spectral.json");
  const double ratio = pick(r, "spectral", "min_lambda_over_first");
  const double l0 = min_rayleigh(assemble_neumann(g, stripes(g, 1), constants(0.0), 1)).value;
  o.require(std::abs(l0) <= 1e-8, "R = 0 lambda " + fmt(l0));
  o.note("constant lambda " + fmt(lc) + ", min lambda_n / lambda_1 " + fmt(ratio) + " over n = 1..32, R = 0 lambda " +
         fmt(l0));
  return o;
}

Outcome closed_forms() {
  Outcome o;
  const Index m = 64;
  const auto g = build_grid(1, m);
  Vector<double> f = test::random_vector(m, 5);
  f.array() -= f.mean();
  const auto un = solve_neumann(g, assemble_neumann(g, stripes(g, 4), constants(), 4), f);
  const double en = (un.u + f).cwiseAbs().maxCoeff();
  // Box of volume two: (Lu)(x) = -2u(x) + integral of u over the box, so u = -1 for f = 1.
  const auto gd = build_grid(1, m, m / 2);
  const auto ud = solve_dirichlet(gd, assemble_dirichlet(gd, stripes(gd, 4), constants(), 4),
                                  Vector<double>(Vector<double>::Ones(m)));
  const double ed = (ud.u + Vector<double>::Ones(m)).cwiseAbs().maxCoeff();
  o.require(en <= 1e-10, "Neumann u = -f");
  o.require(ed <= 1e-10, "Dirichlet u = -1");
  o.note("Neumann |u + f| " + fmt(en) + ", Dirichlet |u + 1| " + fmt(ed));
  return o;
}

Outcome homogenization() {
  Outcome o;
  for (const char* name : {"convergence.json", "convergence_dirichlet.json", "convergence_extended.json"}) {
    const Report r = run_into(o, name);
    // The gaps decay like 1/n, so the absolute bound is reached only on the extended sweep.
    if (std::string(name) == "convergence_extended.json")
      o.require(std::max(final_row(r, "homogenization", "weak_gap_A"), final_row(r, "homogenization", "weak_gap_B")) <
                    1e-2,
                "final weak gaps below 1e-2");
    o.note(std::string(name) + ": gap A ratio " + fmt(pick(r, "homogenization", "weak_gap_A.final_over_initial")) +
           ", gap B ratio " + fmt(pick(r, "homogenization", "weak_gap_B.final_over_initial")) + ", final gaps " +
           fmt(final_row(r, "homogenization", "weak_gap_A")) + "/" + fmt(final_row(r, "homogenization", "weak_gap_B")) + ", limit residual " +
           fmt(std::max(pick(r, "homogenization", "limit.residual_A"), pick(r, "homogenization", "limit.residual_B"))) +
           ", combined " + fmt(pick(r, "homogenization", "limit.combined_residual")));
  }
  return o;
}

Outcome extreme_cases() {
  Outcome o;
  for (const char* name :
       {"extreme_vanishing_neumann.json", "extreme_saturating_neumann.json", "extreme_saturating_dirichlet.json"}) {
    const Report r = run_into(o, name);
    o.note(std::string(name) + ": strong error ratio " + fmt(pick(r, "extreme", "strong_error.final_over_initial")));
  }
  return o;
}

Outcome corrector() {
  Outcome o;
  for (const char* name : {"corrector_neumann.json", "corrector_dirichlet.json"}) {
    const Report r = run_into(o, name);
    o.note(std::string(name) + ": error ratio " + fmt(pick(r, "corrector", "corrector_error.final_over_initial")));
  }
  bool refused = false;
  try {
    validate(parse_config_json(nlohmann::json::parse(
        R"({"scenario": "corrector-study", "partition": {"theta": 0.995}, "n_list": [2, 4]})")));
  } catch (const ConfigError&) {
    refused = true;
  }
  o.require(refused, "config with X = 0.995 refused");
  const auto g = build_grid(1, 16);
  LimitPair<double> p;
  p.uA = p.uB = Vector<double>::Ones(16);
  refused = false;
  try {
    (void)corrector_field(g, stripes(g, 2), Vector<double>(Vector<double>::Zero(16)), p, BoundaryCondition::neumann);
  } catch (const PreconditionError&) {
    refused = true;
  }
  o.require(refused, "corrector_field with X = 0 refused");
  return o;
}

double max_z(const Report& r) {
  double z = 0;
  for (const auto& t : r.mc_tables)
    for (const auto& row : t.rows) z = std::max(z, std::abs(row.z));
  return z;
}

Outcome monte_carlo() {
  Outcome o;
  const Report n = run_into(o, "mc_neumann.json", [](ExperimentSpec& s) { s.mc.invariant_paths = 0; });
  const Report d = run_into(o, "mc_dirichlet.json");
  o.note("max |z| Neumann " + fmt(max_z(n)) + ", Dirichlet " + fmt(max_z(d)));
  o.note("stderr ratios " + fmt(pick(n, "stderr_scaling", "stderr_ratio@*", false)) + ".." +
         fmt(pick(n, "stderr_scaling", "stderr_ratio@*")));
  o.note("min clock p " + fmt(std::min(pick(n, "clocks", "waiting_time_ks_p", false), pick(n, "clocks", "label_chi2_p", false))));
  o.note("generator max z " + fmt(std::max(pick(n, "generator", "max_z"), pick(d, "generator", "max_z"))));
  return o;
}

Outcome exit_times() {
  Outcome o;
  const Report r = run_into(o, "mc_exit_times.json");
  o.require(std::abs(pick(r, "exit_times", "q_hat") - 1.0) < 1e-12, "q_hat == 1");
  o.note("max mean exit time " + fmt(pick(r, "exit_times", "mean_exit_time*")) + ", capped fraction " +
         fmt(pick(r, "exit_times", "capped_fraction*")));
  bool refused = false;
  try {
    (void)run(parse_config_json(nlohmann::json::parse(R"({"scenario": "mc-verify", "bc": "dirichlet",
        "grid": {"m": 32}, "n_list": [2], "mc": {"paths": 200, "start_nodes": [0]}})")));
  } catch (const Error& e) {
    refused = std::string(e.what()).find("q_inf = 0") != std::string::npos;
  }
  o.require(refused, "q_hat = 0 refusal");
  return o;
}

Outcome invariant_measure() {
  Outcome o;
  const Report r = run_into(o, "mc_neumann.json", [](ExperimentSpec& s) {
    s.mc.paths = 100;
    s.mc.start_nodes = {0};
    s.mc.scaling = false;
    s.mc.clock_draws = 0;
    s.mc.generator_samples = 0;
  });
  const double tv = pick(r, "invariant_measure", "tv_distance");
  o.require(std::isfinite(tv), "invariant table present");
  o.note("TV " + fmt(tv) + " over " + fmt(pick(r, "invariant_measure", "total_steps")) + " steps");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome reproducibility() {
  Outcome o;
  int compared = 0;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(configs))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& cfg : files) {
    const ExperimentSpec s = parse_config(cfg.string());
    const std::string name = cfg.stem().string();
    for (const char* format : {"csv", "json"}) {
      std::vector<std::string> written[2];
      for (int k = 0; k < 2; ++k) {
        const fs::path dir = out_root / "repro" / (std::string(format) + std::to_string(k));
        fs::create_directories(dir);
        written[k] = write_report(run(s), format, dir.string(), name);
      }
      bool same = written[0].size() == written[1].size();
      for (std::size_t i = 0; same && i < written[0].size(); ++i)
        same = slurp(written[0][i]) == slurp(written[1][i]) && !slurp(written[0][i]).empty();
      o.require(same, name + "." + format + " differs between runs");
      ++compared;
      if (std::string(format) == "csv" && s.scenario == Scenario::mc_verify) break;  // MC runs are slow; csv suffices
    }
  }
  o.note(std::to_string(compared) + " report pairs over " + std::to_string(files.size()) + " configs byte-identical");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*fn)();
};

const Criterion criteria[] = {
    {1, "kernel-hypotheses", kernel_hypotheses},   {2, "operator-structure", operator_structure},
    {3, "variational-consistency", variational},   {4, "eigenvalue-bound", eigenvalue_bound},
    {5, "closed-form-solves", closed_forms},       {6, "homogenization", homogenization},
    {7, "extreme-cases", extreme_cases},           {8, "corrector", corrector},
    {9, "monte-carlo", monte_carlo},               {10, "exit-times", exit_times},
    {11, "invariant-measure", invariant_measure},  {12, "reproducibility", reproducibility},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  fs::create_directories(out_root);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %-24s %s  [%.1f s] %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures ? 1 : 0;
}
