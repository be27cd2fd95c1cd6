#include "nlh/harness/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

namespace nlh::harness {

using nlohmann::json;

namespace {

// Strict view of a JSON object: every key must be consumed or it is reported.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(label() + ": expected an object");
  }

  std::string key_path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw type_error(key, "string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw type_error(key, "number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "boolean");
      out = v->get<bool>();
    }
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void get_int(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
        } else {
          const auto s = v->get<long long>();
          if (s < 0) throw type_error(key, "non-negative integer");
          out = static_cast<Int>(s);
        }
      } else {
        out = static_cast<Int>(v->get<long long>());
      }
    }
  }

  ConfigError type_error(const std::string& key, const std::string& expected) const {
    return ConfigError("key '" + key_path(key) + "': expected " + expected);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + key_path(it.key()) + "'");
  }

 private:
  std::string label() const { return where_.empty() ? "configuration" : "key '" + where_ + "'"; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename E>
E choose(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> opts) {
  std::string names;
  for (const auto& [name, e] : opts) {
    if (v == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError("key '" + key + "': unknown value '" + v + "' (expected one of " + names + ")");
}

const char* kind_name(PartitionKind k) {
  switch (k) {
    case PartitionKind::stripes: return "stripes";
    case PartitionKind::checkerboard: return "checkerboard";
    case PartitionKind::random: return "random";
    case PartitionKind::explicit_table: return "explicit";
  }
  return "?";
}

const char* schedule_name(FractionSchedule s) {
  switch (s) {
    case FractionSchedule::fixed: return "fixed";
    case FractionSchedule::vanishing: return "vanishing";
    case FractionSchedule::saturating: return "saturating";
  }
  return "?";
}

KernelSpec parse_kernel(Reader& parent, const std::string& key, KernelSpec k) {
  const json* v = parent.find(key);
  if (!v) return k;
  Reader r(*v, parent.key_path(key));
  std::string kind = to_string(k.kind);
  r.get("kind", kind);
  k.kind = choose<KernelKind>(r.key_path("kind"), kind,
                              {{"constant", KernelKind::constant},
                               {"tent", KernelKind::tent},
                               {"gaussian_truncated", KernelKind::gaussian_truncated},
                               {"tabulated", KernelKind::tabulated}});
  r.get("delta", k.delta);
  r.get("sigma", k.sigma);
  r.get("amplitude", k.amplitude);
  r.get("table", k.table);
  if (r.find("norm_mode")) {
    std::string mode;
    r.get("norm_mode", mode);
    k.norm_mode = choose<NormMode>(r.key_path("norm_mode"), mode,
                                   {{"ambient", NormMode::ambient}, {"domain", NormMode::domain}});
  }
  r.finish();
  return k;
}

json kernel_json(const KernelSpec& k) {
  json j;
  j["kind"] = to_string(k.kind);
  j["delta"] = k.delta;
  j["sigma"] = k.sigma;
  j["amplitude"] = k.amplitude;
  j["table"] = k.table;
  j["norm_mode"] = k.norm_mode ? json(*k.norm_mode == NormMode::domain ? "domain" : "ambient") : json(nullptr);
  return j;
}

bool file_exists(const std::string& p) { return std::filesystem::is_regular_file(p); }

}  // namespace

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::solve_neumann: return "solve-neumann";
    case Scenario::solve_dirichlet: return "solve-dirichlet";
    case Scenario::limit_system: return "limit-system";
    case Scenario::convergence_study: return "convergence-study";
    case Scenario::corrector_study: return "corrector-study";
    case Scenario::extreme_case: return "extreme-case";
    case Scenario::mc_verify: return "mc-verify";
    case Scenario::spectral_sweep: return "spectral-sweep";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  return choose<Scenario>("scenario", s,
                          {{"solve-neumann", Scenario::solve_neumann},
                           {"solve-dirichlet", Scenario::solve_dirichlet},
                           {"limit-system", Scenario::limit_system},
                           {"convergence-study", Scenario::convergence_study},
                           {"corrector-study", Scenario::corrector_study},
                           {"extreme-case", Scenario::extreme_case},
                           {"mc-verify", Scenario::mc_verify},
                           {"spectral-sweep", Scenario::spectral_sweep}});
}

std::string resolve_path(const ExperimentSpec& spec, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute() || spec.base_dir.empty()) return p;
  return (std::filesystem::path(spec.base_dir) / path).lexically_normal().string();
}

ExperimentSpec parse_config_json(const json& j, const std::string& base_dir) {
  ExperimentSpec s;
  s.base_dir = base_dir;
  Reader r(j, "");

  std::string scenario;
  r.get("scenario", scenario);
  if (scenario.empty()) throw ConfigError("key 'scenario' is required");
  s.scenario = scenario_from_string(scenario);

  std::string bc = s.scenario == Scenario::solve_dirichlet ? "dirichlet" : "neumann";
  r.get("bc", bc);
  s.bc = choose<BoundaryCondition>("bc", bc,
                                   {{"neumann", BoundaryCondition::neumann}, {"dirichlet", BoundaryCondition::dirichlet}});
  if (s.scenario == Scenario::solve_dirichlet && s.bc != BoundaryCondition::dirichlet)
    throw ConfigError("key 'bc': scenario solve-dirichlet needs bc = dirichlet");
  if (s.scenario == Scenario::solve_neumann && s.bc != BoundaryCondition::neumann)
    throw ConfigError("key 'bc': scenario solve-neumann needs bc = neumann");
  r.get_int("seed", s.seed);

  if (const json* g = r.find("grid")) {
    Reader gr(*g, "grid");
    gr.get_int("dim", s.grid.dim);
    gr.get_int("m", s.grid.m);
    Index pad = -1;
    gr.get_int("pad_cells", pad);
    if (gr.find("pad_cells")) s.grid.pad_cells = pad;
    gr.finish();
  }

  if (const json* p = r.find("partition")) {
    Reader pr(*p, "partition");
    std::string kind = kind_name(s.partition.kind);
    pr.get("kind", kind);
    s.partition.kind = choose<PartitionKind>("partition.kind", kind,
                                             {{"stripes", PartitionKind::stripes},
                                              {"checkerboard", PartitionKind::checkerboard},
                                              {"random", PartitionKind::random},
                                              {"explicit", PartitionKind::explicit_table}});
    pr.get("theta", s.partition.theta);
    std::string sched = schedule_name(s.partition.schedule);
    pr.get("schedule", sched);
    s.partition.schedule = choose<FractionSchedule>("partition.schedule", sched,
                                                    {{"fixed", FractionSchedule::fixed},
                                                     {"vanishing", FractionSchedule::vanishing},
                                                     {"saturating", FractionSchedule::saturating}});
    pr.get_int("seed", s.partition.seed);
    if (const json* t = pr.find("tables")) {
      if (!t->is_object()) throw ConfigError("key 'partition.tables': expected an object mapping n to a file");
      for (auto it = t->begin(); it != t->end(); ++it) {
        int n = 0;
        try {
          std::size_t used = 0;
          n = std::stoi(it.key(), &used);
          if (used != it.key().size()) throw std::invalid_argument("n");
        } catch (const std::exception&) {
          throw ConfigError("key 'partition.tables." + it.key() + "': table keys must be integers");
        }
        if (!it->is_string()) throw ConfigError("key 'partition.tables." + it.key() + "': expected string");
        s.partition.tables[n] = it->get<std::string>();
      }
    }
    pr.finish();
  }

  s.J = {KernelKind::tent, 0.2, 0.0, 1.0, {}, {}};
  s.R = {KernelKind::tent, 0.25, 0.0, 1.0, {}, {}};
  s.G = {KernelKind::tent, 0.3, 0.0, 1.0, {}, {}};
  if (const json* k = r.find("kernels")) {
    Reader kr(*k, "kernels");
    s.J = parse_kernel(kr, "J", s.J);
    s.R = parse_kernel(kr, "R", s.R);
    s.G = parse_kernel(kr, "G", s.G);
    kr.finish();
  }

  if (const json* f = r.find("f")) {
    Reader fr(*f, "f");
    fr.get("name", s.f.name);
    fr.get("value", s.f.value);
    fr.get("path", s.f.path);
    fr.finish();
    choose<int>("f.name", s.f.name, {{"linear", 0}, {"cosine", 1}, {"constant", 2}, {"table", 3}});
  }

  if (const json* n = r.find("n_list")) {
    if (!n->is_array()) throw ConfigError("key 'n_list': expected array of integers");
    s.n_list.clear();
    for (const auto& v : *n) {
      if (!v.is_number_integer()) throw ConfigError("key 'n_list': expected array of integers");
      s.n_list.push_back(v.get<int>());
    }
  }
  r.get_int("dictionary_order", s.dictionary_order);
  r.get_int("perturbations", s.perturbations);

  if (const json* c = r.find("corrector")) {
    Reader cr(*c, "corrector");
    cr.get("c0", s.c0);
    cr.get("c1", s.c1);
    cr.finish();
  }

  if (const json* m = r.find("mc")) {
    Reader mr(*m, "mc");
    mr.get_int("paths", s.mc.paths);
    if (const json* st = mr.find("start_nodes")) {
      if (!st->is_array()) throw ConfigError("key 'mc.start_nodes': expected array of integers");
      for (const auto& v : *st) {
        if (!v.is_number_integer()) throw ConfigError("key 'mc.start_nodes': expected array of integers");
        s.mc.start_nodes.push_back(v.get<Index>());
      }
    }
    mr.get("horizon", s.mc.horizon);
    mr.get("horizon_max", s.mc.horizon_max);
    mr.get_int("pilot_paths", s.mc.pilot_paths);
    mr.get_int("max_jumps", s.mc.max_jumps);
    mr.get("dump", s.mc.dump);
    mr.get("scaling", s.mc.scaling);
    mr.get_int("clock_draws", s.mc.clock_draws);
    mr.get_int("generator_samples", s.mc.generator_samples);
    mr.get_int("generator_functions", s.mc.generator_functions);
    mr.get_int("invariant_paths", s.mc.invariant_paths);
    mr.get_int("invariant_steps", s.mc.invariant_steps);
    mr.finish();
  }

  if (const json* t = r.find("tolerances")) {
    Reader tr(*t, "tolerances");
    Tolerances& x = s.tol;
    tr.get("residual", x.residual);
    tr.get("mean", x.mean);
    tr.get("multiplier", x.multiplier);
    tr.get("symmetry", x.symmetry);
    tr.get("row_sum", x.row_sum);
    tr.get("nullspace", x.nullspace);
    tr.get("kernel_normalization", x.kernel_normalization);
    tr.get("decay_ratio", x.decay_ratio);
    tr.get("monotone_slack", x.monotone_slack);
    tr.get("limit_norm", x.limit_norm);
    tr.get("lambda_ratio", x.lambda_ratio);
    tr.get("z", x.z);
    tr.get("capped_fraction", x.capped_fraction);
    tr.get("significance", x.significance);
    tr.get("stderr_ratio_low", x.stderr_ratio_low);
    tr.get("stderr_ratio_high", x.stderr_ratio_high);
    tr.get("gradient", x.gradient);
    tr.finish();
  }

  if (const json* o = r.find("output")) {
    Reader orr(*o, "output");
    orr.get("dir", s.output.dir);
    orr.get("format", s.output.format);
    orr.get("name", s.output.name);
    orr.get("dump_matrices", s.output.dump_matrices);
    orr.finish();
  }
  r.finish();
  validate(s);
  return s;
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config_json(j, dir.empty() ? "." : dir);
}

void validate(const ExperimentSpec& s) {
  if (s.grid.dim != 1 && s.grid.dim != 2) throw ConfigError("key 'grid.dim': must be 1 or 2");
  if (s.grid.m < 2) throw ConfigError("key 'grid.m': must be at least 2");
  if (s.grid.pad_cells && *s.grid.pad_cells < 0) throw ConfigError("key 'grid.pad_cells': must be non-negative");

  if (s.n_list.empty()) throw ConfigError("key 'n_list': must not be empty");
  for (std::size_t i = 0; i < s.n_list.size(); ++i) {
    if (s.n_list[i] < 1) throw ConfigError("key 'n_list': entries must be >= 1");
    if (i > 0 && s.n_list[i] <= s.n_list[i - 1]) throw ConfigError("n_list must be strictly increasing");
  }
  const PartitionSpec& p = s.partition;
  if (p.kind != PartitionKind::explicit_table && s.grid.m % s.n_list.back() != 0)
    throw ConfigError("key 'grid.m': must be divisible by max(n_list) = " + std::to_string(s.n_list.back()) +
                      " so partition cells align with grid cells");
  if (p.kind == PartitionKind::checkerboard && s.grid.dim != 2)
    throw ConfigError("key 'partition.kind': checkerboard needs grid.dim = 2");
  if (!(p.theta >= 0.0 && p.theta <= 1.0)) throw ConfigError("key 'partition.theta': must lie in [0,1]");
  if (p.kind == PartitionKind::explicit_table) {
    for (int n : s.n_list)
      if (!p.tables.count(n)) throw ConfigError("key 'partition.tables': no table for n = " + std::to_string(n));
    for (const auto& [n, file] : p.tables)
      if (!file_exists(resolve_path(s, file)))
        throw ConfigError("key 'partition.tables." + std::to_string(n) + "': file not found: " + file);
  }

  const std::pair<const char*, const KernelSpec*> kernels[] = {{"J", &s.J}, {"R", &s.R}, {"G", &s.G}};
  bool global = false;
  for (const auto& [name, k] : kernels) {
    const std::string key = std::string("kernels.") + name;
    if ((k->kind == KernelKind::tent || k->kind == KernelKind::gaussian_truncated) && !(k->delta > 0.0))
      throw ConfigError("key '" + key + ".delta': must be positive");
    if (k->sigma < 0.0) throw ConfigError("key '" + key + ".sigma': must be non-negative");
    if (!(k->amplitude >= 0.0)) throw ConfigError("key '" + key + ".amplitude': must be non-negative");
    if (k->kind == KernelKind::tabulated && !file_exists(resolve_path(s, k->table)))
      throw ConfigError("key '" + key + ".table': file not found: " + k->table);
    global = global || k->kind == KernelKind::constant || k->kind == KernelKind::tabulated;
  }
  if (s.scenario == Scenario::spectral_sweep)
    for (const auto& [name, k] : kernels)
      if (k->norm_mode == NormMode::domain && k->kind != KernelKind::constant)
        throw ConfigError(std::string("key 'kernels.") + name +
                          ".norm_mode': spectral-sweep needs symmetric kernels; domain mode rescales rows");
  if (s.bc == BoundaryCondition::dirichlet && global && !s.grid.pad_cells)
    throw ConfigError("key 'grid.pad_cells': Dirichlet runs with globally supported kernels need an explicit pad");

  if (s.f.name == "table" && !file_exists(resolve_path(s, s.f.path)))
    throw ConfigError("key 'f.path': file not found: " + s.f.path);
  if (s.dictionary_order < 0) throw ConfigError("key 'dictionary_order': must be >= 0");
  if (s.perturbations < 0) throw ConfigError("key 'perturbations': must be >= 0");
  if (s.output.format != "csv" && s.output.format != "json")
    throw ConfigError("key 'output.format': expected csv or json");

  if (s.scenario == Scenario::convergence_study || s.scenario == Scenario::corrector_study) {
    if (!(s.c0 > 0.0) || !(s.c1 > 0.0)) throw ConfigError("key 'corrector': c0 and c1 must be positive");
    if (p.schedule != FractionSchedule::fixed || p.theta < s.c0 || p.theta > 1.0 - s.c1)
      throw ConfigError("corrector runs need c0 <= X <= 1 - c1; the configured partition has limit density " +
                        std::string(p.schedule == FractionSchedule::vanishing   ? "0"
                                    : p.schedule == FractionSchedule::saturating ? "1"
                                                                                 : std::to_string(p.theta)) +
                        " with c0 = " + std::to_string(s.c0) + ", c1 = " + std::to_string(s.c1));
  }
  if (s.scenario == Scenario::extreme_case && p.schedule == FractionSchedule::fixed)
    throw ConfigError("key 'partition.schedule': extreme-case needs vanishing or saturating");
  if (s.scenario == Scenario::mc_verify) {
    if (s.n_list.size() != 1) throw ConfigError("key 'n_list': mc-verify takes a single n");
    if (s.mc.start_nodes.empty()) throw ConfigError("key 'mc.start_nodes': mc-verify needs start nodes");
    Index interior = s.grid.m;
    if (s.grid.dim == 2) interior *= s.grid.m;
    for (Index v : s.mc.start_nodes)
      if (v < 0 || v >= interior) throw ConfigError("key 'mc.start_nodes': node " + std::to_string(v) + " out of range");
    if (s.mc.paths < 100) throw ConfigError("key 'mc.paths': at least 100 paths are needed for an estimate");
  }
}

json to_json(const ExperimentSpec& s) {
  json j;
  j["scenario"] = to_string(s.scenario);
  j["bc"] = to_string(s.bc);
  j["seed"] = s.seed;
  j["grid"] = {{"dim", s.grid.dim}, {"m", s.grid.m}};
  j["grid"]["pad_cells"] = s.grid.pad_cells ? json(*s.grid.pad_cells) : json(nullptr);
  json tables = json::object();
  for (const auto& [n, f] : s.partition.tables) tables[std::to_string(n)] = f;
  j["partition"] = {{"kind", kind_name(s.partition.kind)},
                    {"theta", s.partition.theta},
                    {"schedule", schedule_name(s.partition.schedule)},
                    {"seed", s.partition.seed},
                    {"tables", tables}};
  j["kernels"] = {{"J", kernel_json(s.J)}, {"R", kernel_json(s.R)}, {"G", kernel_json(s.G)}};
  j["f"] = {{"name", s.f.name}, {"value", s.f.value}, {"path", s.f.path}};
  j["n_list"] = s.n_list;
  j["dictionary_order"] = s.dictionary_order;
  j["perturbations"] = s.perturbations;
  j["corrector"] = {{"c0", s.c0}, {"c1", s.c1}};
  j["mc"] = {{"paths", s.mc.paths},
             {"start_nodes", s.mc.start_nodes},
             {"horizon", s.mc.horizon},
             {"horizon_max", s.mc.horizon_max},
             {"pilot_paths", s.mc.pilot_paths},
             {"max_jumps", s.mc.max_jumps},
             {"dump", s.mc.dump},
             {"scaling", s.mc.scaling},
             {"clock_draws", s.mc.clock_draws},
             {"generator_samples", s.mc.generator_samples},
             {"generator_functions", s.mc.generator_functions},
             {"invariant_paths", s.mc.invariant_paths},
             {"invariant_steps", s.mc.invariant_steps}};
  const Tolerances& t = s.tol;
  j["tolerances"] = {{"residual", t.residual},
                     {"mean", t.mean},
                     {"multiplier", t.multiplier},
                     {"symmetry", t.symmetry},
                     {"row_sum", t.row_sum},
                     {"nullspace", t.nullspace},
                     {"kernel_normalization", t.kernel_normalization},
                     {"decay_ratio", t.decay_ratio},
                     {"monotone_slack", t.monotone_slack},
                     {"limit_norm", t.limit_norm},
                     {"lambda_ratio", t.lambda_ratio},
                     {"z", t.z},
                     {"capped_fraction", t.capped_fraction},
                     {"significance", t.significance},
                     {"stderr_ratio_low", t.stderr_ratio_low},
                     {"stderr_ratio_high", t.stderr_ratio_high},
                     {"gradient", t.gradient}};
  j["output"] = {{"dir", s.output.dir},
                 {"format", s.output.format},
                 {"name", s.output.name},
                 {"dump_matrices", s.output.dump_matrices}};
  return j;
}

}  // namespace nlh::harness
