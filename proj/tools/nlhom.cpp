#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nlh/harness/run.hpp"
#include "nlh/parallel.hpp"

namespace {

using namespace nlh;
using namespace nlh::harness;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void print_summary(const Report& r, const std::vector<std::string>& files) {
  std::size_t failed = 0;
  for (const auto& t : r.tables)
    for (const auto& row : t.rows)
      if (!row.pass) {
        ++failed;
        std::cerr << "FAIL " << t.name << " n=" << row.n << ' ' << row.metric << " = " << row.value;
        if (row.tol) std::cerr << " (tol " << *row.tol << ')';
        std::cerr << '\n';
      }
  for (const auto& t : r.mc_tables)
    for (const auto& row : t.rows)
      if (!row.pass) {
        ++failed;
        std::cerr << "FAIL " << t.name << " start=" << row.start << " z = " << row.z << '\n';
      }
  for (const auto& f : files) std::cout << f << '\n';
  std::cout << r.scenario << ": " << (failed ? "FAIL" : "PASS") << " (" << failed << " failing rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal two-phase homogenization experiments.\n\n"
               "Environment:\n"
               "  NLHOM_OUT_DIR   default output directory (overridden by --out)\n"
               "  NLHOM_THREADS   worker threads (overridden by --threads; 0 = all cores)"};
  app.require_subcommand(1);

  std::string config;
  std::string format;
  std::string out;
  std::string name;
  std::optional<std::uint64_t> seed;
  int threads = -1;

  auto* run_cmd = app.add_subcommand("run", "Run the scenario described by a JSON config");
  run_cmd->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-f,--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("-o,--out", out, "Output directory");
  run_cmd->add_option("-n,--name", name, "Report base name");
  run_cmd->add_option("-s,--seed", seed, "Override the config seed");
  run_cmd->add_option("-t,--threads", threads, "Worker threads (0 = all cores)");

  auto* validate_cmd = app.add_subcommand("validate", "Parse and validate a config, print its normalized form");
  validate_cmd->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* kernels_cmd = app.add_subcommand("kernels", "Kernel utilities");
  kernels_cmd->require_subcommand(1);
  auto* check_cmd = kernels_cmd->add_subcommand("check", "Check kernel hypotheses on the configured grid");
  check_cmd->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  check_cmd->add_option("-f,--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  check_cmd->add_option("-o,--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads < 0) threads = std::stoi(env_or("NLHOM_THREADS", "0"));
    set_thread_count(threads);

    ExperimentSpec spec = parse_config(config);
    if (seed) spec.seed = *seed;
    if (!format.empty()) spec.output.format = format;
    if (!out.empty()) spec.output.dir = out;
    else spec.output.dir = env_or("NLHOM_OUT_DIR", spec.output.dir);
    if (!name.empty()) spec.output.name = name;

    if (*validate_cmd) {
      validate(spec);
      std::cout << to_json(spec).dump(2) << '\n';
      return 0;
    }
    if (*check_cmd) {
      const Report r = check_kernels(spec);
      print_summary(r, write_report(r, spec.output.format, spec.output.dir, "kernels"));
      return r.all_passed() ? 0 : 1;
    }
    Timings timings;
    const Report r = run(spec, &timings);
    const std::string base = spec.output.name.empty() ? r.scenario : spec.output.name;
    const auto files = write_report(r, spec.output.format, spec.output.dir, base);
    write_timings(timings, spec.output.dir, base);
    print_summary(r, files);
    return r.all_passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
