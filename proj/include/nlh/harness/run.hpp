#pragma once

#include <string>

#include "nlh/harness/config.hpp"
#include "nlh/harness/report.hpp"
#include "nlh/kernel.hpp"
#include "nlh/partition.hpp"

namespace nlh::harness {

inline constexpr const char* version = "1.0.0";

/// A module error annotated with the oscillation index and pipeline stage.
class StageError : public Error {
 public:
  StageError(int n, std::string stage, const std::string& what)
      : Error("n = " + std::to_string(n) + ", stage " + stage + ": " + what), n_(n), stage_(std::move(stage)) {}
  int n() const { return n_; }
  const std::string& stage() const { return stage_; }

 private:
  int n_;
  std::string stage_;
};

/// Grid implied by the spec: padded for Dirichlet runs (explicit pad or
/// enough cells to cover the widest compact kernel), unpadded otherwise.
Grid<double> make_grid(const ExperimentSpec& spec);
KernelSet<double> make_kernels(const ExperimentSpec& spec, const Grid<double>& g);
PartitionFamily<double> make_partition(const ExperimentSpec& spec, const Grid<double>& g);
/// Right-hand side on interior nodes; Neumann data is projected to mean zero
/// and the removed mean is stored in `subtracted_mean`.
Vector<double> make_f(const ExperimentSpec& spec, const Grid<double>& g, double* subtracted_mean = nullptr);

/// Executes the scenario pipeline and returns the report.
Report run(const ExperimentSpec& spec, Timings* timings = nullptr);

/// Kernel hypothesis report for J, R and G on the configured grid, including
/// the normalization error at m and 2m.
Report check_kernels(const ExperimentSpec& spec);

}  // namespace nlh::harness
