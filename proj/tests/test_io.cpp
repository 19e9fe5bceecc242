#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "xychain/io.hpp"

using namespace xychain;
using namespace xychain::io;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s, const std::string& eol) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(eol); pos != std::string::npos; pos = s.find(eol, pos + eol.size())) ++n;
  return n;
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("xychain_test_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("key = value parsing") {
  const auto kv = parse_key_values("# comment\nkind = winding-trace\n\n  N=100  # trailing\nsigma =3\n");
  CHECK(kv.at("kind") == "winding-trace");
  CHECK(kv.at("N") == "100");
  CHECK(kv.at("sigma") == "3");
  CHECK(kv.size() == 3);
  CHECK_THROWS_AS(parse_key_values("this line has no equals sign\n"), ConfigError);
}

TEST_CASE("minimal config resolves a budget-respecting dt") {
  const auto c = parse_config(KeyValues{{"kind", "winding-trace"}, {"N", "100"}, {"J", "20"}, {"sigma", "3"}}, {});
  const auto& s = c.spec;
  CHECK(s.kind == experiments::Kind::kWindingTrace);
  CHECK(s.params.N == 100);
  CHECK(s.integrator.dt == doctest::Approx(default_dt(s.params)));
  CHECK(s.params.J * s.integrator.dt <= 0.02);
  CHECK(s.params.sigma * std::sqrt(s.integrator.dt) <= 0.05 * (1 + 1e-12));
  CHECK(s.integrator.max_time > 0.0);
  CHECK(s.integrator.record_stride >= 1);
}

TEST_CASE("config errors") {
  try {
    parse_config(KeyValues{{"kind", "winding-trace"}, {"N", "100"}, {"J", "20"}, {"sigma", "3"}, {"dt", "0.01"}}, {});
    FAIL("expected budget rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("J*dt <= 0.02") != std::string::npos);
  }
  try {
    parse_config(KeyValues{{"kind", "winding-trace"}, {"colour", "red"}}, {});
    FAIL("expected unknown key rejection");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("colour") != std::string::npos);
    CHECK(msg.find("sigma") != std::string::npos);
    CHECK(msg.find("replicas") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(KeyValues{{"N", "10"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValues{{"kind", "winding-trace"}, {"N", "ten"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValues{{"kind", "bogus"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValues{{"kind", "winding-trace"}, {"N", "2"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValues{{"kind", "scaling-sweep"}, {"grid", "10:1"}}, {}), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValues{{"kind", "winding-trace"}, {"format", "xml"}}, {}), ConfigError);
}

TEST_CASE("flags override file values") {
  const auto c = parse_config(KeyValues{{"kind", "exit-histogram"}, {"seed", "3"}}, KeyValues{{"seed", "7"}});
  CHECK(c.spec.integrator.seed == 7);
  CHECK(make_manifest(c, "exits").seed == 7);
  CHECK(make_manifest(c, "exits").spec.at("seed") == "7");
}

TEST_CASE("resolved config round-trips") {
  const auto c = parse_config(KeyValues{{"kind", "scaling-sweep"},
                                        {"grid", "10:1:0.6324555320336759,20:1:0.6324555320336759"},
                                        {"replicas", "12"},
                                        {"J", "1.3"},
                                        {"sigma", "0.7"},
                                        {"format", "jsonl"},
                                        {"out", "/tmp/somewhere"},
                                        {"p_min", "0.02"}},
                              {});
  const auto kv = to_key_values(c);
  const auto back = parse_config(kv, {});
  CHECK(back.spec == c.spec);
  CHECK(back.format == c.format);
  CHECK(back.out_dir == c.out_dir);
  CHECK(to_key_values(back) == kv);
  REQUIRE(c.spec.sweep_grid.size() == 2);
  CHECK(c.spec.sweep_grid[1].N == 20);
  CHECK(c.spec.thresholds.p_min == 0.02);
}

TEST_CASE("config file and manifest as config") {
  const auto dir = temp_dir("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "kind = exit-histogram\nN = 20\nJ = 20\nsigma = 3\nseed = 3\n";
  }
  const auto c = parse_config(dir / "run.cfg", KeyValues{{"seed", "7"}});
  CHECK(c.spec.integrator.seed == 7);

  auto m = make_manifest(c, "exits");
  m.outputs = {"exits.csv"};
  const std::string text = manifest_json(m);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["seed"] == 7);
  CHECK(j["command"] == "exits");
  CHECK(j["finished"].is_null());
  CHECK(j["spec"]["N"] == "20");
  write_text(text, dir / "m.json");
  const auto again = parse_config(dir / "m.json", {});
  CHECK(again.spec == c.spec);
  CHECK_THROWS_AS(read_config_file(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("shortest round-trip doubles") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, i % 40 - 20);
    const auto s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
}

TEST_CASE("csv encoding") {
  Table empty{{"a", "b"}, {}};
  CHECK(to_csv(empty) == "a,b\r\n");
  CHECK(to_jsonl(empty).empty());

  Table t{{"text", "x", "flag", "n", "missing"}, {}};
  t.add({std::string("plain"), 0.25, true, std::int64_t{-3}, Cell{}});
  t.add({std::string("a,b \"q\"\nline"), 1e-7, false, std::int64_t{4}, Cell{}});
  CHECK(to_csv(t) ==
        "text,x,flag,n,missing\r\nplain,0.25,true,-3,\r\n\"a,b \"\"q\"\"\nline\",1e-07,false,4,\r\n");
  CHECK_THROWS_AS(t.add({1.0}), std::logic_error);
}

TEST_CASE("jsonl encoding") {
  Table t{{"x", "w", "missing"}, {}};
  t.add({std::nan(""), std::int64_t{2}, Cell{}});
  t.add({1.5, std::int64_t{-1}, Cell{}});
  const auto s = to_jsonl(t);
  CHECK(count_lines(s, "\n") == 2);
  CHECK(s == "{\"x\":null,\"w\":2,\"missing\":null}\n{\"x\":1.5,\"w\":-1,\"missing\":null}\n");
}

TEST_CASE("result tables") {
  Trajectory tr;
  tr.times = {0.0, 0.5, 1.0};
  tr.windings = {WindingNumber(0), WindingNumber(1), WindingNumber::ill_defined()};
  tr.energy = {-3.0, -2.5, -2.0};
  tr.correlation = {1.0, 0.5, 0.0};
  tr.magnetization = {0.1, 0.2, 0.3};
  const auto t = trajectory_table(tr);
  CHECK(t.rows.size() == 3);
  CHECK(t.columns == std::vector<std::string>{"t", "winding", "energy", "correlation", "magnetization"});
  const auto csv = to_csv(t);
  CHECK(csv.rfind("t,winding,energy,correlation,magnetization\r\n", 0) == 0);
  CHECK(count_lines(csv, "\r\n") == 4);
  CHECK(csv.find("ill_defined") != std::string::npos);

  std::vector<ExitRecord> recs{{1, 2.5, true, WindingNumber::ill_defined()}, {1, 0.75, false, WindingNumber(2)}};
  CHECK(to_csv(exit_table(recs)) ==
        "replica,start_winding,exit_time,censored,exit_target\r\n0,1,2.5,true,\r\n1,1,0.75,false,2\r\n");

  theory::WindingDistribution d;
  d.K = 1;
  d.probabilities = {0.25, 0.5, 0.25};
  CHECK(oracle_table(d).rows.size() == 3);
}

TEST_CASE("file output errors name the path") {
  const auto dir = temp_dir("write");
  const auto good = dir / "nested" / "t.csv";
  write_table(Table{{"a"}, {}}, Format::kCsv, good);
  CHECK(read_file(good) == "a\r\n");

  const auto blocker = dir / "file";
  write_text("x", blocker);
  const auto bad = blocker / "sub" / "t.csv";
  try {
    write_table(Table{{"a"}, {}}, Format::kCsv, bad);
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
  }
}

TEST_CASE("default output directory follows the environment") {
  setenv("XYCHAIN_OUT_DIR", "/tmp/xy_out", 1);
  CHECK(default_out_dir() == fs::path("/tmp/xy_out"));
  CHECK(parse_config(KeyValues{{"kind", "clt-test"}}, {}).out_dir == fs::path("/tmp/xy_out"));
  unsetenv("XYCHAIN_OUT_DIR");
  CHECK(default_out_dir() == fs::path("."));
}

TEST_CASE("format names") {
  CHECK(format_from_string("csv") == Format::kCsv);
  CHECK(format_from_string("jsonl") == Format::kJsonl);
  CHECK(to_string(Format::kJsonl) == "jsonl");
  CHECK_THROWS_AS(format_from_string("xml"), ConfigError);
  CHECK(utc_timestamp().size() == 20);
  CHECK_FALSE(code_version().empty());
}
