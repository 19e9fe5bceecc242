// Command-line front end for the XY chain experiments.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "xychain/experiments.hpp"
#include "xychain/io.hpp"
#include "xychain/theory.hpp"

namespace {

namespace ex = xychain::experiments;
namespace io = xychain::io;
namespace th = xychain::theory;
using ordered_json = nlohmann::ordered_json;

struct Command {
  std::string name;
  std::string kind;
  std::string help;
};

const std::vector<Command> kCommands = {
    {"simulate", "winding-trace", "run the dynamics and record the winding trace"},
    {"exits", "exit-histogram", "first-exit times from a winding phase with an exponential fit"},
    {"sweep", "scaling-sweep", "mean exit times over a grid of (N, J, sigma)"},
    {"clt", "clt-test", "equilibrium winding law against the exact oracle"},
    {"theory", "winding-trace", "print bond-law moments, the oracle winding law and time scales"},
    {"correlate", "correlation", "mid-chain correlation in phases 0 and 1"},
    {"field", "field-response", "magnetization under an external field in phases 0 and 1"},
    {"badwatch", "bad-event-watch", "fraction of time spent in the bad event along the dynamics"},
};

std::string json_number(double v) { return io::format_double(v); }

ordered_json fit_json(const ex::ExitHistogram& h) {
  ordered_json j;
  j["rate_mle"] = h.fit.rate_mle;
  j["ks_statistic"] = h.fit.ks_statistic;
  j["ks_pvalue"] = h.fit.ks_pvalue;
  j["n_censored"] = h.fit.n_censored;
  j["n_events"] = h.fit.n_events;
  j["mean_exit"] = h.mean_exit.mean;
  j["stderr"] = h.mean_exit.std_error;
  j["censored_fraction"] = h.censored_fraction;
  j["horizon"] = h.horizon;
  j["t_center"] = h.prediction.t_center;
  j["t_lower"] = h.prediction.t_lower;
  j["t_upper"] = h.prediction.t_upper;
  return j;
}

struct Outputs {
  std::filesystem::path dir;
  io::Format format;
  std::string command;
  std::vector<std::string> files;

  std::filesystem::path table_path() const {
    return dir / (command + (format == io::Format::kCsv ? ".csv" : ".jsonl"));
  }
  std::filesystem::path summary_path() const { return dir / (command + "_summary.json"); }
};

void run_command(const std::string& command, const io::RunConfig& cfg, Outputs& out) {
  const auto& spec = cfg.spec;
  const auto table = out.table_path();
  const auto summary = out.summary_path();
  ordered_json s = ordered_json::object();

  if (command == "simulate") {
    const auto tr = ex::run_winding_trace(spec);
    io::write_table(io::trajectory_table(tr), cfg.format, table);
    s["samples"] = tr.size();
    s["distinct_windings"] = ex::distinct_windings(tr);
    s["steps"] = tr.diagnostics.steps;
    s["multi_jumps"] = tr.diagnostics.multi_jumps;
    s["ill_defined_steps"] = tr.diagnostics.ill_defined_steps;
    std::cout << "samples " << tr.size() << ", distinct windings " << s["distinct_windings"].dump() << "\n";
  } else if (command == "exits") {
    const auto h = ex::run_exit_histogram(spec);
    io::write_table(io::exit_table(h.records), cfg.format, table);
    s = fit_json(h);
    std::cout << "rate_mle " << json_number(h.fit.rate_mle) << ", ks_pvalue " << json_number(h.fit.ks_pvalue)
              << ", censored " << h.fit.n_censored << "/" << h.records.size() << "\n";
  } else if (command == "sweep") {
    const auto r = ex::run_scaling_sweep(spec);
    io::write_table(io::sweep_table(r), cfg.format, table);
    s["consecutive_ratios"] = r.consecutive_ratios;
    s["log_slope"] = r.log_slope ? ordered_json(*r.log_slope) : ordered_json(nullptr);
    s["log_slope_stderr"] = r.log_slope_std_error ? ordered_json(*r.log_slope_std_error) : ordered_json(nullptr);
    for (const auto& row : r.rows) {
      std::cout << "N " << row.point.N << " J " << json_number(row.point.J) << " sigma " << json_number(row.point.sigma)
                << ": mean exit " << json_number(row.mean_exit) << " +- " << json_number(row.std_error) << "\n";
    }
  } else if (command == "clt") {
    const auto r = ex::run_clt_test(spec);
    io::write_table(io::winding_table(r), cfg.format, table);
    s["samples"] = r.windings.size();
    s["ill_defined"] = r.ill_defined;
    s["chi_square"] = r.chi_square.statistic;
    s["chi_square_dof"] = r.chi_square.dof;
    s["chi_square_pvalue"] = r.chi_square.p_value;
    s["normality_statistic"] = r.normality.statistic;
    s["normality_pvalue"] = r.normality.p_value;
    s["fraction_zero"] = r.fraction_zero;
    std::cout << "chi-square p " << json_number(r.chi_square.p_value) << ", normality p "
              << json_number(r.normality.p_value) << ", P(W=0) " << json_number(r.fraction_zero) << "\n";
  } else if (command == "theory") {
    const auto& p = spec.params;
    const auto m = th::moments(p.kappa());
    const auto t = th::timescale(p, spec.epsilon);
    std::cout << "kappa " << json_number(p.kappa()) << "\n"
              << "m " << json_number(m.m) << "\nlog_m " << json_number(m.log_m) << "\ns2 " << json_number(m.s2)
              << "\nbeta3 " << json_number(m.beta3) << "\n"
              << "t_center " << json_number(t.t_center) << "\nt_lower " << json_number(t.t_lower) << "\nt_upper "
              << json_number(t.t_upper) << "\n";
    s["kappa"] = p.kappa();
    s["m"] = m.m;
    s["log_m"] = m.log_m;
    s["s2"] = m.s2;
    s["beta3"] = m.beta3;
    s["epsilon"] = spec.epsilon;
    s["t_center"] = t.t_center;
    s["t_lower"] = t.t_lower;
    s["t_upper"] = t.t_upper;
    if (p.field_B == 0.0) {
      const auto d = th::winding_distribution(p, th::suggested_support(p.kappa(), p.N));
      std::cout << "winding law (k probability):\n";
      for (int k = -d.K; k <= d.K; ++k) {
        if (d.probability(k) >= 1e-12) std::cout << "  " << k << " " << json_number(d.probability(k)) << "\n";
      }
      io::write_table(io::oracle_table(d), cfg.format, table);
      s["oracle_variance"] = d.variance();
      s["oracle_tail_mass"] = d.tail_mass;
    } else {
      std::cout << "winding law: requires B = 0\n";
      io::write_table(io::Table{{"k", "probability"}, {}}, cfg.format, table);
    }
  } else if (command == "correlate") {
    const auto r = ex::run_correlation(spec);
    io::write_table(io::phase_table(r, "correlation"), cfg.format, table);
    for (const auto& ph : r) {
      std::cout << "k " << ph.k << ": mean correlation " << json_number(ph.value.mean) << " +- "
                << json_number(ph.value.std_error) << "\n";
    }
  } else if (command == "field") {
    const auto r = ex::run_field_response(spec, spec.params.field_B);
    io::write_table(io::field_table(r), cfg.format, table);
    s["horizon"] = r.horizon;
    for (const auto& ph : r.phases) {
      std::cout << "k " << ph.k << ": magnetization " << json_number(ph.value.mean) << " +- "
                << json_number(ph.value.std_error) << "\n";
    }
  } else if (command == "badwatch") {
    const auto r = ex::run_bad_event_watch(spec, spec.r, spec.delta);
    io::write_table(io::bad_event_table(r), cfg.format, table);
    std::cout << "fraction in bad event " << json_number(r.fraction) << " over " << r.samples << " samples\n";
  }
  io::write_text(s.dump(2) + "\n", summary);
}

std::string kind_for(const std::string& command) {
  for (const auto& c : kCommands)
    if (c.name == command) return c.kind;
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"XY rotor chain: metastable winding dynamics and equilibrium oracles", "xychain"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::code_version());

  std::map<std::string, std::string> values;
  std::string config_path;
  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key=value config file or a manifest .json");
    for (const auto& key : io::valid_keys()) {
      if (key == "kind") continue;
      sub->add_option("--" + key, values[key], "overrides config key '" + key + "'");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  io::KeyValues flags;
  for (const auto& key : io::valid_keys()) {
    if (key == "kind") continue;
    if (sub->count("--" + key) > 0) flags[key] = values[key];
  }

  io::RunConfig cfg;
  try {
    io::KeyValues file = config_path.empty() ? io::KeyValues{} : io::read_config_file(config_path);
    const std::string implied = kind_for(command);
    if (auto it = file.find("kind"); it != file.end() && it->second != implied && command != "theory") {
      throw io::ConfigError("config kind '" + it->second + "' does not match subcommand '" + command + "' (" +
                            implied + ")");
    }
    file["kind"] = implied;
    cfg = io::parse_config(file, flags);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  Outputs out{cfg.out_dir, cfg.format, command, {}};
  out.files = {out.table_path().filename().string(), out.summary_path().filename().string()};
  try {
    auto manifest = io::make_manifest(cfg, command);
    manifest.outputs = out.files;
    const auto manifest_path = cfg.out_dir / (command + "_manifest.json");
    io::write_text(io::manifest_json(manifest), manifest_path);
    run_command(command, cfg, out);
    manifest.finished = io::utc_timestamp();
    io::write_text(io::manifest_json(manifest), manifest_path);
  } catch (const ex::DegenerateFit& e) {
    std::cerr << "degenerate fit: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
