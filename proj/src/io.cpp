#include "xychain/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "xychain/theory.hpp"

namespace xychain::io {

namespace {

using experiments::ExperimentSpec;
using experiments::Kind;
using experiments::StartProtocol;
using ordered_json = nlohmann::ordered_json;

// Upper bound on recorded samples when record_stride is defaulted.
constexpr double kMaxDefaultRecords = 1e5;
constexpr double kBadEventMaxSteps = 1e5;

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("invalid value for '" + key + "': '" + value + "' (expected " + expected + ")");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<experiments::GridPoint> parse_grid(const std::string& key, const std::string& v) {
  std::vector<experiments::GridPoint> grid;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto a = item.find(':');
    const auto b = a == std::string::npos ? a : item.find(':', a + 1);
    if (b == std::string::npos) bad_value(key, v, "a comma-separated list of N:J:sigma");
    grid.push_back({parse_int<int>(key, item.substr(0, a)), parse_double(key, item.substr(a + 1, b - a - 1)),
                    parse_double(key, item.substr(b + 1))});
  }
  if (grid.empty()) bad_value(key, v, "a comma-separated list of N:J:sigma");
  return grid;
}

std::string grid_to_string(const std::vector<experiments::GridPoint>& grid) {
  std::string s;
  for (const auto& g : grid) {
    if (!s.empty()) s += ',';
    s += std::to_string(g.N) + ':' + format_double(g.J) + ':' + format_double(g.sigma);
  }
  return s;
}

struct KeyInfo {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define XY_DOUBLE(name, field)                                                                \
  KeyInfo {                                                                                   \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_double(name, v); },        \
        [](const RunConfig& c) { return format_double(c.field); }                             \
  }
#define XY_INT(name, field, type)                                                             \
  KeyInfo {                                                                                   \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_int<type>(name, v); },     \
        [](const RunConfig& c) { return std::to_string(c.field); }                            \
  }

const std::vector<KeyInfo>& key_table() {
  static const std::vector<KeyInfo> keys = {
      {"kind", [](RunConfig& c, const std::string& v) { c.spec.kind = experiments::kind_from_string(v); },
       [](const RunConfig& c) { return std::string(experiments::to_string(c.spec.kind)); }},
      XY_INT("N", spec.params.N, int),
      XY_DOUBLE("J", spec.params.J),
      XY_DOUBLE("sigma", spec.params.sigma),
      XY_DOUBLE("B", spec.params.field_B),
      XY_DOUBLE("dt", spec.integrator.dt),
      XY_DOUBLE("max_time", spec.integrator.max_time),
      XY_INT("record_stride", spec.integrator.record_stride, int),
      XY_INT("seed", spec.integrator.seed, std::uint64_t),
      XY_INT("replicas", spec.replicas, int),
      XY_INT("k", spec.k, int),
      {"start",
       [](RunConfig& c, const std::string& v) {
         if (v == "conditional") c.spec.start = StartProtocol::kConditional;
         else if (v == "equilibrium") c.spec.start = StartProtocol::kEquilibrium;
         else bad_value("start", v, "conditional or equilibrium");
       },
       [](const RunConfig& c) {
         return std::string(c.spec.start == StartProtocol::kConditional ? "conditional" : "equilibrium");
       }},
      XY_INT("r", spec.r, int),
      XY_DOUBLE("delta", spec.delta),
      XY_DOUBLE("epsilon", spec.epsilon),
      XY_DOUBLE("horizon_factor", spec.horizon_factor),
      XY_DOUBLE("dt_scale", spec.dt_scale),
      XY_INT("samples", spec.samples, int),
      XY_INT("workers", spec.workers, int),
      {"grid", [](RunConfig& c, const std::string& v) { c.spec.sweep_grid = parse_grid("grid", v); },
       [](const RunConfig& c) { return grid_to_string(c.spec.sweep_grid); }},
      XY_DOUBLE("proposal_width", spec.mcmc.proposal_width),
      XY_INT("burn_in", spec.mcmc.burn_in_sweeps, int),
      XY_INT("thinning", spec.mcmc.thinning_sweeps, int),
      {"auto_tune", [](RunConfig& c, const std::string& v) { c.spec.mcmc.auto_tune = parse_bool("auto_tune", v); },
       [](const RunConfig& c) { return std::string(c.spec.mcmc.auto_tune ? "true" : "false"); }},
      XY_DOUBLE("target_acceptance", spec.mcmc.target_acceptance),
      XY_DOUBLE("p_min", spec.thresholds.p_min),
      XY_DOUBLE("censored_max", spec.thresholds.censored_max),
      XY_DOUBLE("ratio_min", spec.thresholds.ratio_min),
      XY_DOUBLE("ratio_max", spec.thresholds.ratio_max),
      XY_DOUBLE("slope_min", spec.thresholds.slope_min),
      XY_DOUBLE("slope_max", spec.thresholds.slope_max),
      {"format", [](RunConfig& c, const std::string& v) { c.format = format_from_string(v); },
       [](const RunConfig& c) { return to_string(c.format); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir.string(); }},
  };
  return keys;
}

#undef XY_DOUBLE
#undef XY_INT

const KeyInfo* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

std::string valid_key_list() {
  std::string s;
  for (const auto& k : key_table()) {
    if (!s.empty()) s += ", ";
    s += k.name;
  }
  return s;
}

double default_max_time(const ExperimentSpec& s) {
  const double tc = theory::timescale(s.params, 0.0).t_center;
  switch (s.kind) {
    case Kind::kWindingTrace:
      return 100.0 * tc;
    case Kind::kExitHistogram:
      return s.horizon_factor * tc;
    case Kind::kFieldResponse:
      return tc / 10.0;
    case Kind::kBadEventWatch:
      return std::min(std::exp(2.0 * s.params.coupling_ratio()), kBadEventMaxSteps) * s.integrator.dt;
    default:
      return tc;
  }
}

void csv_cell(std::string& out, const Cell& c) {
  struct Visitor {
    std::string& out;
    void operator()(std::monostate) const {}
    void operator()(bool b) const { out += b ? "true" : "false"; }
    void operator()(std::int64_t i) const { out += std::to_string(i); }
    void operator()(double d) const { out += format_double(d); }
    void operator()(const std::string& s) const {
      if (s.find_first_of(",\"\r\n") == std::string::npos) {
        out += s;
        return;
      }
      out += '"';
      for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
      }
      out += '"';
    }
  };
  std::visit(Visitor{out}, c);
}

ordered_json json_cell(const Cell& c) {
  struct Visitor {
    ordered_json operator()(std::monostate) const { return nullptr; }
    ordered_json operator()(bool b) const { return b; }
    ordered_json operator()(std::int64_t i) const { return i; }
    ordered_json operator()(double d) const {
      if (!std::isfinite(d)) return nullptr;
      return d;
    }
    ordered_json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, c);
}

Cell winding_cell(const WindingNumber& w) {
  if (w.defined()) return static_cast<std::int64_t>(w.value());
  return std::string("ill_defined");
}

}  // namespace

Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::kCsv;
  if (s == "jsonl") return Format::kJsonl;
  bad_value("format", s, "csv or jsonl");
}

std::string to_string(Format f) { return f == Format::kCsv ? "csv" : "jsonl"; }

const std::vector<std::string>& valid_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : key_table()) v.push_back(k.name);
    return v;
  }();
  return names;
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() != ".json") return parse_key_values(buf.str(), path.string());

  ordered_json j;
  try {
    j = ordered_json::parse(buf.str());
  } catch (const std::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (!j.contains("spec") || !j["spec"].is_object()) throw ConfigError("manifest " + path.string() + " has no spec object");
  KeyValues kv;
  for (const auto& [key, value] : j["spec"].items()) kv[key] = value.is_string() ? value.get<std::string>() : value.dump();
  return kv;
}

RunConfig parse_config(const KeyValues& file, const KeyValues& flags) {
  KeyValues merged = file;
  for (const auto& [k, v] : flags) merged[k] = v;
  for (const auto& [k, v] : merged) {
    if (!find_key(k)) throw ConfigError("unknown key '" + k + "'; valid keys: " + valid_key_list());
  }
  if (!merged.count("kind")) throw ConfigError("missing required key 'kind'");

  RunConfig c;
  c.out_dir = default_out_dir();
  auto& s = c.spec;
  try {
    // Model parameters first: several defaults depend on them.
    for (const char* k : {"kind", "N", "J", "sigma", "B", "horizon_factor"}) {
      if (auto it = merged.find(k); it != merged.end()) find_key(k)->set(c, it->second);
    }
    for (const auto& [k, v] : merged) find_key(k)->set(c, v);

    if (!merged.count("r")) s.r = std::min(s.r, s.params.N);
    s.params.validate();
    if (!merged.count("dt")) s.integrator.dt = default_dt(s.params);
    if (!merged.count("max_time")) s.integrator.max_time = default_max_time(s);
    if (!merged.count("record_stride")) {
      const double steps = std::floor(s.integrator.max_time / s.integrator.dt);
      s.integrator.record_stride = std::max(1, static_cast<int>(std::ceil(steps / kMaxDefaultRecords)));
    }
    s.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig parse_config(const std::filesystem::path& path, const KeyValues& flags) {
  return parse_config(read_config_file(path), flags);
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv;
  for (const auto& k : key_table()) {
    if (k.name == "grid" && c.spec.sweep_grid.empty()) continue;
    kv[k.name] = k.get(c);
  }
  return kv;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::logic_error("Table::add: row width does not match the header");
  rows.push_back(std::move(row));
}

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    csv_cell(out, t.columns[i]);
  }
  out += "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      csv_cell(out, row[i]);
    }
    out += "\r\n";
  }
  return out;
}

std::string to_jsonl(const Table& t) {
  std::string out;
  for (const auto& row : t.rows) {
    ordered_json j = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) j[t.columns[i]] = json_cell(row[i]);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_table(const Table& t, Format f, const std::filesystem::path& path) {
  write_text(f == Format::kCsv ? to_csv(t) : to_jsonl(t), path);
}

Table trajectory_table(const Trajectory& tr) {
  Table t;
  t.columns = {"t", "winding"};
  const bool e = !tr.energy.empty(), c = !tr.correlation.empty(), m = !tr.magnetization.empty(),
             g = !tr.good_intervals.empty();
  if (e) t.columns.push_back("energy");
  if (c) t.columns.push_back("correlation");
  if (m) t.columns.push_back("magnetization");
  if (g) t.columns.push_back("good_intervals");
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::vector<Cell> row{tr.times[i], winding_cell(tr.windings[i])};
    if (e) row.emplace_back(tr.energy[i]);
    if (c) row.emplace_back(tr.correlation[i]);
    if (m) row.emplace_back(tr.magnetization[i]);
    if (g) row.emplace_back(static_cast<std::int64_t>(tr.good_intervals[i]));
    t.add(std::move(row));
  }
  return t;
}

Table exit_table(const std::vector<ExitRecord>& records) {
  Table t;
  t.columns = {"replica", "start_winding", "exit_time", "censored", "exit_target"};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    t.add({static_cast<std::int64_t>(i), static_cast<std::int64_t>(r.start_winding), r.exit_time, r.censored,
           r.censored ? Cell{} : winding_cell(r.exit_target)});
  }
  return t;
}

Table sweep_table(const experiments::SweepResult& s) {
  Table t;
  t.columns = {"N", "J", "sigma", "mean_exit", "stderr", "replicas", "n_censored", "dt", "horizon"};
  for (const auto& r : s.rows) {
    t.add({static_cast<std::int64_t>(r.point.N), r.point.J, r.point.sigma, r.mean_exit, r.std_error,
           static_cast<std::int64_t>(r.replicas), static_cast<std::int64_t>(r.n_censored), r.dt, r.horizon});
  }
  return t;
}

Table winding_table(const experiments::CltResult& c) {
  Table t;
  t.columns = {"k", "empirical", "oracle"};
  for (int k = -c.oracle.K; k <= c.oracle.K; ++k) t.add({static_cast<std::int64_t>(k), c.empirical.probability(k), c.oracle.probability(k)});
  return t;
}

Table oracle_table(const theory::WindingDistribution& d) {
  Table t;
  t.columns = {"k", "probability"};
  for (int k = -d.K; k <= d.K; ++k) t.add({static_cast<std::int64_t>(k), d.probability(k)});
  return t;
}

Table phase_table(const std::vector<experiments::PhaseAverage>& phases, const std::string& value_name) {
  Table t;
  t.columns = {"k", value_name, "stderr", "n"};
  for (const auto& p : phases) {
    t.add({static_cast<std::int64_t>(p.k), p.value.mean, p.value.std_error, static_cast<std::int64_t>(p.value.n)});
  }
  return t;
}

Table field_table(const experiments::FieldResponse& f) {
  Table t = phase_table(f.phases, "magnetization");
  t.columns.push_back("exited");
  t.columns.push_back("horizon");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    t.rows[i].emplace_back(static_cast<std::int64_t>(f.exited[i]));
    t.rows[i].emplace_back(f.horizon);
  }
  return t;
}

Table bad_event_table(const experiments::BadEventResult& b) {
  Table t;
  t.columns = {"fraction", "samples", "in_event", "replica_mean", "replica_stderr", "horizon"};
  t.add({b.fraction, static_cast<std::int64_t>(b.samples), static_cast<std::int64_t>(b.in_event), b.per_replica.mean,
         b.per_replica.std_error, b.horizon});
  return t;
}

std::string manifest_json(const RunManifest& m) {
  ordered_json j;
  j["code_version"] = m.code_version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["started"] = m.started;
  j["finished"] = m.finished.empty() ? ordered_json(nullptr) : ordered_json(m.finished);
  ordered_json spec = ordered_json::object();
  for (const auto& [k, v] : m.spec) spec[k] = v;
  j["spec"] = spec;
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

RunManifest make_manifest(const RunConfig& c, const std::string& command) {
  RunManifest m;
  m.spec = to_key_values(c);
  m.seed = c.spec.integrator.seed;
  m.code_version = code_version();
  m.command = command;
  m.started = utc_timestamp();
  return m;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string code_version() { return XYCHAIN_VERSION; }

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("XYCHAIN_OUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace xychain::io
