#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "nlh/harness/config.hpp"

using namespace nlh;
using namespace nlh::harness;
using nlohmann::json;

namespace {
ExperimentSpec parse(const std::string& text) { return parse_config_json(json::parse(text)); }
}  // namespace

TEST_CASE("minimal Neumann config fills defaults") {
  const auto s = parse(R"({"scenario": "solve-neumann", "grid": {"m": 32},
                           "kernels": {"J": {"kind": "tent", "delta": 0.2}}, "f": {"name": "linear"}})");
  CHECK(s.scenario == Scenario::solve_neumann);
  CHECK(s.bc == BoundaryCondition::neumann);
  CHECK(s.grid.m == 32);
  CHECK(s.tol.residual == 1e-10);
  CHECK(s.tol.z == 3.0);
  CHECK(s.J.delta == 0.2);
  CHECK(s.R.kind == KernelKind::tent);
  CHECK(s.n_list == std::vector<int>{1});
}

TEST_CASE("n_list must be strictly increasing") {
  CHECK_THROWS_WITH_AS(parse(R"({"scenario": "solve-neumann", "n_list": [4, 2]})"),
                       "n_list must be strictly increasing", ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-neumann", "n_list": [2, 2]})"), ConfigError);
}

TEST_CASE("unknown keys are errors naming the key") {
  CHECK_THROWS_WITH_AS(parse(R"({"scenario": "solve-neumann", "kernel_J_sigma2": 1.0})"),
                       doctest::Contains("kernel_J_sigma2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse(R"({"scenario": "solve-neumann", "grid": {"mm": 4}})"), doctest::Contains("grid.mm"),
                       ConfigError);
}

TEST_CASE("type errors name the key and the expected type") {
  CHECK_THROWS_WITH_AS(parse(R"({"scenario": "solve-neumann", "grid": {"m": "big"}})"),
                       doctest::Contains("grid.m"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-sideways"})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-neumann", "bc": "periodic"})"), ConfigError);
}

TEST_CASE("cross-field checks") {
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-neumann", "grid": {"m": 30}, "n_list": [4]})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-neumann", "partition": {"kind": "checkerboard"}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-dirichlet", "bc": "dirichlet",
                            "kernels": {"J": {"kind": "constant"}}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "mc-verify", "n_list": [2, 4], "mc": {"start_nodes": [0]}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "mc-verify", "grid": {"m": 16}, "n_list": [2], "mc": {"start_nodes": [16]}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "extreme-case", "n_list": [2, 4]})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "solve-neumann", "f": {"name": "table", "path": "missing.csv"}})"),
                  ConfigError);
}

TEST_CASE("corrector runs refuse densities outside the bounds") {
  CHECK_THROWS_WITH_AS(parse(R"({"scenario": "corrector-study", "partition": {"theta": 0.0}, "n_list": [2, 4]})"),
                       doctest::Contains("c0"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "corrector-study", "partition": {"theta": 0.995}, "n_list": [2, 4]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"scenario": "corrector-study", "partition": {"schedule": "vanishing"},
                            "n_list": [2, 4]})"),
                  ConfigError);
  CHECK_NOTHROW(parse(R"({"scenario": "corrector-study", "partition": {"theta": 0.995},
                          "corrector": {"c0": 0.001, "c1": 0.001}, "n_list": [2, 4]})"));
}

TEST_CASE("normalized form round trips") {
  const auto s = parse(R"({"scenario": "mc-verify", "bc": "dirichlet", "grid": {"m": 32, "pad_cells": 16},
                           "kernels": {"J": {"kind": "constant"}, "R": {"kind": "constant"}, "G": {"kind": "constant"}},
                           "n_list": [2], "mc": {"start_nodes": [0, 5], "paths": 500}})");
  const json j = to_json(s);
  const auto back = parse_config_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.grid.pad_cells == Index(16));
  CHECK(back.mc.start_nodes == std::vector<Index>{0, 5});
}

TEST_CASE("files and relative paths") {
  const auto dir = std::filesystem::temp_directory_path() / "nlh_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "f.csv") << "value\n1\n2\n";
    std::ofstream(dir / "c.json") << R"({"scenario": "solve-neumann", "grid": {"m": 2},
                                          "f": {"name": "table", "path": "f.csv"}})";
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  const auto s = parse_config((dir / "c.json").string());
  CHECK(std::filesystem::path(resolve_path(s, s.f.path)) == dir / "f.csv");
  CHECK_THROWS_AS(parse_config((dir / "bad.json").string()), ConfigError);
  CHECK_THROWS_AS(parse_config((dir / "none.json").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario names") {
  for (auto s : {Scenario::solve_neumann, Scenario::solve_dirichlet, Scenario::limit_system,
                 Scenario::convergence_study, Scenario::corrector_study, Scenario::extreme_case, Scenario::mc_verify,
                 Scenario::spectral_sweep})
    CHECK(scenario_from_string(to_string(s)) == s);
}
