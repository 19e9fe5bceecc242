#pragma once

// Configuration parsing, result tables (CSV / JSONL) and run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "xychain/experiments.hpp"

namespace xychain::io {

/// Invalid or inconsistent configuration (CLI exit status 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failure; the message names the path (CLI exit status 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

enum class Format { kCsv, kJsonl };
Format format_from_string(const std::string& s);
std::string to_string(Format f);

/// Every key accepted in a config file or as a --key flag.
const std::vector<std::string>& valid_keys();

/// Reads `key = value` lines ('#' starts a comment). A path ending in
/// ".json" is read as a manifest and its "spec" object is used instead.
KeyValues read_config_file(const std::filesystem::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& origin = "config");

struct RunConfig {
  experiments::ExperimentSpec spec;
  Format format = Format::kCsv;
  std::filesystem::path out_dir = ".";
};

/// Merges file and flag values (flags win), resolves defaults and validates.
/// Unknown keys and violated constraints raise ConfigError.
RunConfig parse_config(const KeyValues& file, const KeyValues& flags);
/// Convenience: parse_config(read_config_file(path), flags).
RunConfig parse_config(const std::filesystem::path& path, const KeyValues& flags);

/// Fully resolved key/value form; parse_config(to_key_values(c), {}) == c.
KeyValues to_key_values(const RunConfig& c);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

using Cell = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

std::string to_csv(const Table& t);
std::string to_jsonl(const Table& t);
/// Writes the table in the given format; throws IoError naming the path.
void write_table(const Table& t, Format f, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

Table trajectory_table(const Trajectory& t);
Table exit_table(const std::vector<ExitRecord>& records);
Table sweep_table(const experiments::SweepResult& s);
Table winding_table(const experiments::CltResult& c);
Table oracle_table(const theory::WindingDistribution& d);
Table phase_table(const std::vector<experiments::PhaseAverage>& phases, const std::string& value_name);
Table field_table(const experiments::FieldResponse& f);
Table bad_event_table(const experiments::BadEventResult& b);

struct RunManifest {
  KeyValues spec;
  std::uint64_t seed = 0;
  std::string code_version;
  std::string command;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
};

std::string manifest_json(const RunManifest& m);
RunManifest make_manifest(const RunConfig& c, const std::string& command);
std::string utc_timestamp();
std::string code_version();

/// Default output directory: $XYCHAIN_OUT_DIR when set, otherwise ".".
std::filesystem::path default_out_dir();

}  // namespace xychain::io
