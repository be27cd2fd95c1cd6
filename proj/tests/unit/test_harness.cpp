#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "nlh/harness/run.hpp"
#include "nlh/parallel.hpp"

using namespace nlh;
using namespace nlh::harness;
using nlohmann::json;

namespace {

ExperimentSpec spec(const std::string& text, const std::string& base = ".") {
  return parse_config_json(json::parse(text), base);
}

const MetricTable* find(const Report& r, const std::string& name) {
  for (const auto& t : r.tables)
    if (t.name == name) return &t;
  return nullptr;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("every scenario emits criterion-tagged rows") {
  const char* configs[] = {
      R"({"scenario": "solve-neumann", "grid": {"m": 32}, "n_list": [1, 2], "perturbations": 8})",
      R"({"scenario": "solve-dirichlet", "bc": "dirichlet", "grid": {"m": 32}, "n_list": [2], "perturbations": 4,
          "f": {"name": "constant"}})",
      R"({"scenario": "limit-system", "grid": {"m": 32}})",
      R"({"scenario": "convergence-study", "grid": {"m": 32}, "n_list": [2, 4]})",
      R"({"scenario": "corrector-study", "grid": {"m": 32}, "n_list": [2, 4]})",
      R"({"scenario": "extreme-case", "grid": {"m": 32}, "n_list": [2, 4],
          "partition": {"theta": 1.0, "schedule": "vanishing"}})",
      R"({"scenario": "spectral-sweep", "grid": {"m": 32}, "n_list": [1, 2, 4]})",
      R"({"scenario": "mc-verify", "grid": {"m": 16}, "n_list": [2],
          "mc": {"paths": 200, "start_nodes": [0], "horizon": 20.0}})"};
  for (const char* c : configs) {
    const auto s = spec(c);
    const Report r = run(s);
    CHECK(r.scenario == to_string(s.scenario));
    bool tagged = false;
    for (const auto& t : r.tables) {
      CHECK_FALSE(t.criterion.empty());
      for (const auto& row : t.rows) tagged = tagged || row.tol.has_value();
    }
    for (const auto& t : r.mc_tables) tagged = tagged || !t.rows.empty();
    CHECK(tagged);
    CHECK(r.provenance.config_hash.size() == 16);
  }
}

TEST_CASE("Neumann data is projected and the removed mean reported") {
  const auto s = spec(R"({"scenario": "solve-neumann", "grid": {"m": 16}, "perturbations": 0,
                          "f": {"name": "constant", "value": 2.0}})");
  double mu = 0.0;
  const auto g = make_grid(s);
  const auto f = make_f(s, g, &mu);
  CHECK(mu == doctest::Approx(2.0));
  CHECK(f.cwiseAbs().maxCoeff() < 1e-15);
  const Report r = run(s);
  const auto* t = find(r, "solve");
  REQUIRE(t);
  CHECK(t->rows.front().metric == "f.subtracted_mean");
  CHECK(t->rows.front().value == doctest::Approx(2.0));
}

TEST_CASE("Dirichlet grids are padded to cover the kernels") {
  const auto s = spec(R"({"scenario": "solve-dirichlet", "bc": "dirichlet", "grid": {"m": 40}})");
  const auto g = make_grid(s);
  CHECK(g.pad_width() >= 0.3 - 1e-12);
  CHECK(make_grid(spec(R"({"scenario": "solve-neumann", "grid": {"m": 40}})")).pad_cells() == 0);
}

TEST_CASE("module errors carry the n index and stage") {
  // R = 0 with separated constant phases makes the bordered system singular.
  const auto s = spec(R"({"scenario": "solve-neumann", "grid": {"m": 16}, "n_list": [1, 2],
                          "kernels": {"J": {"kind": "constant"}, "R": {"kind": "constant", "amplitude": 0.0},
                                      "G": {"kind": "constant"}}})");
  try {
    (void)run(s);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "solve");
    CHECK((e.n() == 1 || e.n() == 2));
    CHECK(std::string(e.what()).find("stage solve") != std::string::npos);
  }
}

TEST_CASE("q = 0 Dirichlet Monte Carlo is refused") {
  const auto s = spec(R"({"scenario": "mc-verify", "bc": "dirichlet", "grid": {"m": 32}, "n_list": [2],
                          "mc": {"paths": 200, "start_nodes": [0]}})");
  CHECK_THROWS_WITH_AS(run(s), doctest::Contains("q_inf = 0"), StageError);
}

TEST_CASE("explicit partitions and tabulated data from files") {
  const auto dir = std::filesystem::temp_directory_path() / "nlh_harness_files";
  std::filesystem::create_directories(dir);
  {
    std::ofstream chi(dir / "chi2.csv");
    chi << "value\n";
    for (int i = 0; i < 16; ++i) chi << ((i / 4) % 2 == 0 ? 1 : 0) << '\n';
    std::ofstream f(dir / "f.csv");
    f << "value\n";
    for (int i = 0; i < 16; ++i) f << (i < 8 ? 1 : -1) << '\n';
    std::ofstream k(dir / "k.csv");
    k << "x_index,y_index,value\n";
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) k << i << ',' << j << ',' << 1.0 << '\n';
  }
  const auto s = spec(R"({"scenario": "solve-neumann", "grid": {"m": 16}, "n_list": [2], "perturbations": 4,
                          "partition": {"kind": "explicit", "theta": 0.5, "tables": {"2": "chi2.csv"}},
                          "kernels": {"J": {"kind": "tabulated", "table": "k.csv"}},
                          "f": {"name": "table", "path": "f.csv"}})",
                      dir.string());
  const Report r = run(s);
  CHECK(r.all_passed());
  const auto fam = make_partition(s, make_grid(s));
  const auto chi = indicator(fam, 2, make_grid(s));
  CHECK(chi[0] == 1.0);
  CHECK(chi[4] == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("kernel check report") {
  const auto s = spec(R"({"scenario": "solve-neumann", "grid": {"m": 64},
                          "kernels": {"J": {"kind": "tent", "delta": 0.25},
                                      "R": {"kind": "gaussian_truncated", "delta": 0.25},
                                      "G": {"kind": "constant"}}})");
  const Report r = check_kernels(s);
  CHECK(r.all_passed());
  const auto* t = find(r, "kernels");
  REQUIRE(t);
  int ratios = 0;
  for (const auto& row : t->rows)
    if (row.metric.find("refinement_ratio") != std::string::npos) ++ratios;
  CHECK(ratios == 3);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
  const auto s = spec(R"({"scenario": "mc-verify", "grid": {"m": 16}, "n_list": [2], "seed": 9,
                          "mc": {"paths": 300, "start_nodes": [0, 7], "pilot_paths": 100}})");
  const auto base = std::filesystem::temp_directory_path() / "nlh_harness_repro";
  std::filesystem::remove_all(base);
  set_thread_count(1);
  write_report(run(s), "csv", (base / "a").string(), "r");
  set_thread_count(3);
  write_report(run(s), "csv", (base / "b").string(), "r");
  set_thread_count(0);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(base / "a")) {
    ++files;
    CHECK(slurp(e.path()) == slurp(base / "b" / e.path().filename()));
  }
  CHECK(files >= 3);
  std::filesystem::remove_all(base);
}

TEST_CASE("kernel normalization mode from the config") {
  const auto s = spec(R"({"scenario": "solve-neumann", "grid": {"m": 32},
                          "kernels": {"J": {"kind": "tent", "delta": 0.2, "norm_mode": "domain"},
                                      "G": {"kind": "constant", "norm_mode": "ambient"}}})");
  REQUIRE(s.J.norm_mode == NormMode::domain);
  CHECK_FALSE(s.R.norm_mode.has_value());
  CHECK(to_json(s)["kernels"]["J"]["norm_mode"] == "domain");
  CHECK(to_json(s)["kernels"]["R"]["norm_mode"].is_null());
  const auto g = make_grid(s);
  const auto ks = make_kernels(s, g);
  CHECK(ks.J.norm_mode() == NormMode::domain);
  CHECK(ks.R.norm_mode() == NormMode::ambient);
  CHECK(ks.G.norm_mode() == NormMode::ambient);
  const Vector<double> mass = row_masses(ks.J, g, false);
  CHECK((mass.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(validate_hypotheses(ks.J, g, 1e-3).asymmetry > 0.0);  // rows rescaled separately

  CHECK_THROWS_WITH_AS(spec(R"({"scenario": "solve-neumann", "kernels": {"J": {"norm_mode": "box"}}})"),
                       doctest::Contains("kernels.J.norm_mode"), ConfigError);
}

TEST_CASE("Neumann Monte Carlo refuses domain-normalized kernels") {
  const auto s = spec(R"({"scenario": "mc-verify", "grid": {"m": 16}, "n_list": [2],
                          "kernels": {"J": {"kind": "tent", "delta": 0.3, "norm_mode": "domain"}},
                          "mc": {"paths": 100, "start_nodes": [0]}})");
  CHECK_THROWS_AS(run(s), StageError);
}
