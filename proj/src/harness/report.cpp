#include "nlh/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nlh/error.hpp"

namespace nlh::harness {

using nlohmann::json;

namespace {

// JSON has no infinities or NaN; those travel as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  throw ConfigError("report: bad numeric entry '" + s + "'");
}

// Shortest decimal that round-trips, matching the JSON writer.
std::string csv_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  return json(v).dump();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir);
}

}  // namespace

bool Report::all_passed() const {
  for (const auto& t : tables)
    for (const auto& r : t.rows)
      if (!r.pass) return false;
  for (const auto& t : mc_tables)
    for (const auto& r : t.rows)
      if (!r.pass) return false;
  return true;
}

MetricTable& Report::table(const std::string& name, const std::string& criterion) {
  for (auto& t : tables)
    if (t.name == name) return t;
  tables.push_back({name, criterion, {}});
  return tables.back();
}

json to_json(const Report& r) {
  json j;
  j["scenario"] = r.scenario;
  j["config"] = r.config;
  json tables = json::array();
  for (const auto& t : r.tables) {
    json rows = json::array();
    for (const auto& row : t.rows)
      rows.push_back({{"n", row.n},
                      {"metric", row.metric},
                      {"value", number(row.value)},
                      {"tol", row.tol ? number(*row.tol) : json(nullptr)},
                      {"pass", row.pass}});
    tables.push_back({{"name", t.name}, {"criterion", t.criterion}, {"rows", rows}});
  }
  j["tables"] = tables;
  json mc = json::array();
  for (const auto& t : r.mc_tables) {
    json rows = json::array();
    for (const auto& row : t.rows)
      rows.push_back({{"start", row.start},
                      {"estimate", number(row.estimate)},
                      {"stderr", number(row.std_error)},
                      {"oracle", number(row.oracle)},
                      {"z", number(row.z)},
                      {"tol", number(row.tol)},
                      {"pass", row.pass}});
    mc.push_back({{"name", t.name}, {"criterion", t.criterion}, {"rows", rows}});
  }
  j["mc_tables"] = mc;
  const Provenance& p = r.provenance;
  j["provenance"] = {{"software", p.software}, {"version", p.version},         {"scenario", p.scenario},
                     {"seed", p.seed},         {"config_hash", p.config_hash}, {"compiler", p.compiler},
                     {"eigen", p.eigen}};
  j["all_passed"] = r.all_passed();
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  try {
    r.scenario = j.at("scenario").get<std::string>();
    r.config = j.at("config");
    for (const auto& t : j.at("tables")) {
      MetricTable mt{t.at("name").get<std::string>(), t.at("criterion").get<std::string>(), {}};
      for (const auto& row : t.at("rows")) {
        MetricRow m;
        m.n = row.at("n").get<int>();
        m.metric = row.at("metric").get<std::string>();
        m.value = read_number(row.at("value"));
        if (!row.at("tol").is_null()) m.tol = read_number(row.at("tol"));
        m.pass = row.at("pass").get<bool>();
        mt.rows.push_back(std::move(m));
      }
      r.tables.push_back(std::move(mt));
    }
    for (const auto& t : j.at("mc_tables")) {
      McTable mt{t.at("name").get<std::string>(), t.at("criterion").get<std::string>(), {}};
      for (const auto& row : t.at("rows")) {
        McRow m;
        m.start = row.at("start").get<Index>();
        m.estimate = read_number(row.at("estimate"));
        m.std_error = read_number(row.at("stderr"));
        m.oracle = read_number(row.at("oracle"));
        m.z = read_number(row.at("z"));
        m.tol = read_number(row.at("tol"));
        m.pass = row.at("pass").get<bool>();
        mt.rows.push_back(m);
      }
      r.mc_tables.push_back(std::move(mt));
    }
    const json& p = j.at("provenance");
    r.provenance.software = p.at("software").get<std::string>();
    r.provenance.version = p.at("version").get<std::string>();
    r.provenance.scenario = p.at("scenario").get<std::string>();
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.compiler = p.at("compiler").get<std::string>();
    r.provenance.eigen = p.at("eigen").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::vector<std::string> write_report(const Report& r, const std::string& format, const std::string& dir,
                                      const std::string& name) {
  ensure_dir(dir);
  std::vector<std::string> files;
  const std::filesystem::path base(dir);
  if (format == "json") {
    const auto p = base / (name + ".json");
    auto out = open_out(p);
    out << to_json(r).dump(2) << '\n';
    files.push_back(p.string());
    return files;
  }
  if (format != "csv") throw ConfigError("report format must be csv or json");
  for (const auto& t : r.tables) {
    const auto p = base / (name + "." + t.name + ".csv");
    auto out = open_out(p);
    out << "n,metric,value,tol,pass\n";
    for (const auto& row : t.rows)
      out << row.n << ',' << csv_field(row.metric) << ',' << csv_number(row.value) << ','
          << (row.tol ? csv_number(*row.tol) : std::string()) << ',' << (row.pass ? "true" : "false") << '\n';
    files.push_back(p.string());
  }
  for (const auto& t : r.mc_tables) {
    const auto p = base / (name + "." + t.name + ".csv");
    auto out = open_out(p);
    out << "start,estimate,stderr,oracle,z,tol,pass\n";
    for (const auto& row : t.rows)
      out << row.start << ',' << csv_number(row.estimate) << ',' << csv_number(row.std_error) << ','
          << csv_number(row.oracle) << ',' << csv_number(row.z) << ',' << csv_number(row.tol) << ','
          << (row.pass ? "true" : "false") << '\n';
    files.push_back(p.string());
  }
  // Provenance and the criterion index travel in a small JSON sidecar.
  const auto p = base / (name + ".provenance.json");
  json meta = to_json(r);
  meta.erase("tables");
  meta.erase("mc_tables");
  json index = json::array();
  for (const auto& t : r.tables) index.push_back({{"table", t.name}, {"criterion", t.criterion}});
  for (const auto& t : r.mc_tables) index.push_back({{"table", t.name}, {"criterion", t.criterion}});
  meta["tables"] = index;
  auto out = open_out(p);
  out << meta.dump(2) << '\n';
  files.push_back(p.string());
  return files;
}

void write_timings(const Timings& t, const std::string& dir, const std::string& name) {
  ensure_dir(dir);
  json j = json::object();
  for (const auto& [stage, secs] : t.stages) j[stage] = secs;
  auto out = open_out(std::filesystem::path(dir) / (name + ".timings.json"));
  out << j.dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nlh::harness
