#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlh/types.hpp"

namespace nlh::harness {

struct MetricRow {
  int n = 0;  ///< oscillation index, 0 when the row is not tied to one
  std::string metric;
  double value = 0.0;
  std::optional<double> tol;  ///< absent for purely informational rows
  bool pass = true;

  bool operator==(const MetricRow&) const = default;
};

/// Rows of one metric family; `criterion` names the acceptance criterion it feeds.
struct MetricTable {
  std::string name;
  std::string criterion;
  std::vector<MetricRow> rows;

  void add(int n, std::string metric, double value, std::optional<double> tol, bool pass) {
    rows.push_back({n, std::move(metric), value, tol, pass});
  }
  /// Informational entry; always passes.
  void info(int n, std::string metric, double value) { add(n, std::move(metric), value, std::nullopt, true); }
  /// Passes when value <= tol.
  void at_most(int n, std::string metric, double value, double tol) {
    add(n, std::move(metric), value, tol, value <= tol);
  }
  /// Passes when value >= tol.
  void at_least(int n, std::string metric, double value, double tol) {
    add(n, std::move(metric), value, tol, value >= tol);
  }

  bool operator==(const MetricTable&) const = default;
};

struct McRow {
  Index start = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  double oracle = 0.0;
  double z = 0.0;
  double tol = 3.0;
  bool pass = true;

  bool operator==(const McRow&) const = default;
};

struct McTable {
  std::string name;
  std::string criterion;
  std::vector<McRow> rows;

  bool operator==(const McTable&) const = default;
};

struct Provenance {
  std::string software = "nlhom";
  std::string version;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string compiler;
  std::string eigen;

  bool operator==(const Provenance&) const = default;
};

struct Report {
  std::string scenario;
  nlohmann::json config;  ///< normalized configuration echo
  std::deque<MetricTable> tables;  ///< deque: references from table() stay valid
  std::vector<McTable> mc_tables;
  Provenance provenance;

  bool all_passed() const;
  MetricTable& table(const std::string& name, const std::string& criterion);

  bool operator==(const Report&) const = default;
};

/// Wall-clock seconds per stage; written next to the report, never inside it,
/// so reports stay byte-identical across runs.
struct Timings {
  std::vector<std::pair<std::string, double>> stages;
};

nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

/// Writes the report in `format` ("csv" or "json") under `dir` using `name` as
/// the base file name; returns the files written.
std::vector<std::string> write_report(const Report& r, const std::string& format, const std::string& dir,
                                      const std::string& name);
void write_timings(const Timings& t, const std::string& dir, const std::string& name);

/// FNV-1a hash of a string as 16 hex digits.
std::string fnv1a_hex(const std::string& s);

}  // namespace nlh::harness
