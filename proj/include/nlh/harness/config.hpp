#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlh/kernel.hpp"
#include "nlh/partition.hpp"

namespace nlh::harness {

enum class Scenario {
  solve_neumann,
  solve_dirichlet,
  limit_system,
  convergence_study,
  corrector_study,
  extreme_case,
  mc_verify,
  spectral_sweep
};

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct GridSpec {
  int dim = 1;
  Index m = 64;
  std::optional<Index> pad_cells;  ///< default: 0 (Neumann) or enough to cover the kernels (Dirichlet)
};

struct KernelSpec {
  KernelKind kind = KernelKind::tent;
  double delta = 0.25;
  double sigma = 0.0;  ///< gaussian width; 0 means delta / 3
  double amplitude = 1.0;
  std::string table;   ///< CSV path for tabulated kernels
  std::optional<NormMode> norm_mode;  ///< default: domain for constant and tabulated kinds, ambient otherwise
};

struct PartitionSpec {
  PartitionKind kind = PartitionKind::stripes;
  double theta = 0.5;  ///< base volume fraction; also the limit density for the explicit kind
  FractionSchedule schedule = FractionSchedule::fixed;
  std::uint64_t seed = 0;
  std::map<int, std::string> tables;  ///< explicit kind: n -> CSV of 0/1 values per node
};

/// Right-hand side: "linear" (x1 - 1/2), "cosine" (cos 2 pi x1), "constant" (value) or "table" (path).
struct FSpec {
  std::string name = "linear";
  double value = 1.0;
  std::string path;
};

struct McSpec {
  int paths = 10000;
  std::vector<Index> start_nodes;
  double horizon = 0.0;
  double horizon_max = 5000.0;
  int pilot_paths = 400;
  long long max_jumps = 0;
  std::string dump;
  bool scaling = false;          ///< stderr check at paths, 4 paths, 16 paths on the first start node
  int clock_draws = 0;           ///< clock-construction equivalence test size; 0 skips
  int generator_samples = 0;     ///< one-step samples per node for the generator check; 0 skips
  int generator_functions = 10;
  int invariant_paths = 0;       ///< invariant-measure check; 0 skips
  long long invariant_steps = 0;
};

struct Tolerances {
  double residual = 1e-10;
  double mean = 1e-12;
  double multiplier = 1e-10;
  double symmetry = 1e-12;
  double row_sum = 1e-10;
  double nullspace = 1e-10;
  double kernel_normalization = 1e-3;
  double decay_ratio = 0.25;
  double monotone_slack = 1.2;
  double limit_norm = 1e-3;
  double lambda_ratio = 0.9;
  double z = 3.0;
  double capped_fraction = 0.01;
  double significance = 1e-3;
  double stderr_ratio_low = 1.8;
  double stderr_ratio_high = 2.2;
  double gradient = 1e-8;
};

struct OutputSpec {
  std::string dir = "out";
  std::string format = "csv";
  std::string name;  ///< report base name, default the scenario
  bool dump_matrices = false;
};

struct ExperimentSpec {
  Scenario scenario = Scenario::solve_neumann;
  BoundaryCondition bc = BoundaryCondition::neumann;
  std::uint64_t seed = 1;
  GridSpec grid;
  PartitionSpec partition;
  KernelSpec J, R, G;
  FSpec f;
  std::vector<int> n_list{1};
  int dictionary_order = 3;
  double c0 = 0.01;
  double c1 = 0.01;
  int perturbations = 100;
  McSpec mc;
  Tolerances tol;
  OutputSpec output;
  std::string base_dir;  ///< directory that relative file paths are resolved against
};

/// Parses and validates a JSON configuration; unknown keys and type
/// mismatches raise ConfigError naming the key.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_json(const nlohmann::json& j, const std::string& base_dir = ".");

/// Checks cross-field constraints (n_list order, grid alignment, files, density bounds).
void validate(const ExperimentSpec& spec);

/// Normalized JSON form of the spec (all defaults filled in).
nlohmann::json to_json(const ExperimentSpec& spec);

/// Resolves `p` against the spec's base directory.
std::string resolve_path(const ExperimentSpec& spec, const std::string& p);

}  // namespace nlh::harness
