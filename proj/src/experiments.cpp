#include "xychain/experiments.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "xychain/rng.hpp"

namespace xychain::experiments {

namespace {

constexpr std::array<std::pair<Kind, std::string_view>, 7> kKindNames{{
    {Kind::kWindingTrace, "winding-trace"},
    {Kind::kExitHistogram, "exit-histogram"},
    {Kind::kScalingSweep, "scaling-sweep"},
    {Kind::kCltTest, "clt-test"},
    {Kind::kCorrelation, "correlation"},
    {Kind::kFieldResponse, "field-response"},
    {Kind::kBadEventWatch, "bad-event-watch"},
}};

// Offset separating the MCMC streams of phase 1 from those of phase 0.
constexpr std::uint64_t kPhaseStreamOffset = std::uint64_t{1} << 32;

McmcConfig replica_mcmc(const ExperimentSpec& spec, std::uint64_t stream) {
  McmcConfig c = spec.mcmc;
  c.seed = spec.integrator.seed;
  c.stream = stream;
  return c;
}

IntegratorConfig replica_integrator(const IntegratorConfig& base, std::uint64_t replica) {
  IntegratorConfig c = base;
  c.replica = replica;
  return c;
}

ChainState initial_state(const ModelParams& p, StartProtocol start, int k, const McmcConfig& mc) {
  if (start == StartProtocol::kEquilibrium) return sample_mu(p, mc);
  return sample_mu_conditional(p, k, mc);
}

std::vector<ExitRecord> exit_replicas(const ModelParams& p, const IntegratorConfig& base, const ExperimentSpec& spec,
                                      int k) {
  return parallel_map(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t r) {
    const ChainState x0 = sample_mu_conditional(p, k, replica_mcmc(spec, r));
    return first_exit(x0, p, replica_integrator(base, r), k);
  });
}

stats::MeanEstimate exit_mean(const std::vector<ExitRecord>& records, const FitResult& fit) {
  if (fit.n_censored == 0) {
    std::vector<double> t;
    t.reserve(records.size());
    for (const auto& r : records) t.push_back(r.exit_time);
    return stats::mean_estimate(t);
  }
  stats::MeanEstimate m;
  m.n = records.size();
  m.mean = 1.0 / fit.rate_mle;
  m.std_error = m.mean / std::sqrt(static_cast<double>(fit.n_events));
  return m;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("ExperimentSpec: " + what);
}

bool uses_dynamics(Kind k) {
  return k == Kind::kWindingTrace || k == Kind::kExitHistogram || k == Kind::kFieldResponse ||
         k == Kind::kBadEventWatch;
}

void require_kind(const ExperimentSpec& spec, Kind kind) {
  if (spec.kind != kind) {
    throw std::invalid_argument("experiment kind mismatch: expected " + std::string(to_string(kind)) + ", got " +
                                std::string(to_string(spec.kind)));
  }
}

}  // namespace

std::string_view to_string(Kind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

Kind kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  std::ostringstream m;
  m << "unknown experiment kind '" << name << "'; valid kinds:";
  for (const auto& entry : kKindNames) m << ' ' << entry.second;
  throw std::invalid_argument(m.str());
}

std::vector<std::string_view> kind_names() {
  std::vector<std::string_view> v;
  for (const auto& entry : kKindNames) v.push_back(entry.second);
  return v;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void ExperimentSpec::validate() const {
  params.validate();
  mcmc.validate();
  require(replicas >= 1, "replicas must be >= 1");
  require(workers >= 0, "workers must be >= 0");
  require(samples >= 1, "samples must be >= 1");
  require(r >= 1 && r <= params.N, "r must satisfy 1 <= r <= N");
  require(delta > 0.0, "delta must be > 0");
  require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0, 1)");
  require(horizon_factor > 0.0, "horizon_factor must be > 0");
  require(dt_scale > 0.0 && dt_scale <= 2.0, "dt_scale must lie in (0, 2] so the step budget holds");
  if (kind == Kind::kScalingSweep) {
    require(!sweep_grid.empty(), "sweep_grid must be nonempty for scaling-sweep");
    for (const auto& g : sweep_grid) {
      ModelParams p{g.N, g.J, g.sigma, params.field_B};
      p.validate();
      require(2 * std::abs(k) < g.N, "need |k| < N/2 at every grid point");
    }
  } else {
    require(2 * std::abs(k) < params.N, "need |k| < N/2");
  }
  if (uses_dynamics(kind)) integrator.validate(params);
}

FitResult fit_exit_times(const std::vector<ExitRecord>& records) {
  if (records.empty()) throw DegenerateFit("exit fit: no records");
  std::vector<double> times;
  std::vector<double> exits;
  // std::vector<bool> has no contiguous storage to view as a span.
  const auto censored = std::make_unique<bool[]>(records.size());
  double horizon = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    times.push_back(r.exit_time);
    censored[i] = r.censored;
    if (r.censored) horizon = std::max(horizon, r.exit_time);
    else exits.push_back(r.exit_time);
  }
  const auto fit = stats::fit_exponential(times, std::span<const bool>(censored.get(), records.size()));

  FitResult out;
  out.n_censored = fit.n_censored;
  out.n_events = fit.n_events;
  if (fit.n_events == 0) {
    std::ostringstream m;
    m << "exit fit: all " << records.size() << " replicas censored at horizon " << horizon
      << "; increase max_time or lower J/sigma^2";
    throw DegenerateFit(m.str());
  }
  out.rate_mle = fit.rate;
  const double rate = fit.rate;
  const double norm = out.n_censored > 0 ? -std::expm1(-rate * horizon) : 1.0;
  const auto ks = stats::ks_test(exits, [rate, norm](double t) {
    return t <= 0.0 ? 0.0 : std::min(1.0, -std::expm1(-rate * t) / norm);
  });
  out.ks_statistic = ks.statistic;
  out.ks_pvalue = ks.p_value;
  return out;
}

Trajectory run_winding_trace(const ExperimentSpec& spec) {
  require_kind(spec, Kind::kWindingTrace);
  spec.validate();
  const ChainState x0 = initial_state(spec.params, spec.start, spec.k, replica_mcmc(spec, 0));
  return simulate(x0, spec.params, replica_integrator(spec.integrator, 0));
}

ExitHistogram run_exit_histogram(const ExperimentSpec& spec) {
  require_kind(spec, Kind::kExitHistogram);
  spec.validate();
  ExitHistogram h;
  h.records = exit_replicas(spec.params, spec.integrator, spec, spec.k);
  h.horizon = static_cast<double>(spec.integrator.steps()) * spec.integrator.dt;
  h.prediction = theory::timescale(spec.params, spec.epsilon);
  h.fit = fit_exit_times(h.records);
  h.censored_fraction = static_cast<double>(h.fit.n_censored) / static_cast<double>(h.records.size());
  h.mean_exit = exit_mean(h.records, h.fit);
  return h;
}

SweepResult run_scaling_sweep(const ExperimentSpec& spec) {
  require_kind(spec, Kind::kScalingSweep);
  spec.validate();
  SweepResult out;
  for (const auto& g : spec.sweep_grid) {
    const ModelParams p{g.N, g.J, g.sigma, spec.params.field_B};
    IntegratorConfig ic = spec.integrator;
    ic.dt = spec.dt_scale * default_dt(p);
    ic.max_time = spec.horizon_factor * theory::timescale(p, 0.0).t_center;
    ic.record_stride = 1;
    // Replica r draws its initial state and noise from (seed, r) at every grid point.
    const auto records = exit_replicas(p, ic, spec, spec.k);
    const FitResult fit = fit_exit_times(records);
    const auto m = exit_mean(records, fit);
    out.rows.push_back({g, m.mean, m.std_error, spec.replicas, fit.n_censored, ic.dt,
                        static_cast<double>(ic.steps()) * ic.dt});
  }
  for (std::size_t i = 0; i + 1 < out.rows.size(); ++i)
    out.consecutive_ratios.push_back(out.rows[i].mean_exit / out.rows[i + 1].mean_exit);

  std::vector<double> x, y, var;
  for (const auto& row : out.rows) {
    x.push_back(row.point.J / (row.point.sigma * row.point.sigma));
    y.push_back(std::log(row.mean_exit));
    const double rel = row.std_error / row.mean_exit;
    var.push_back(rel * rel);
  }
  const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxx = 0.0, sxy = 0.0, svar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
    svar += (x[i] - xbar) * (x[i] - xbar) * var[i];
  }
  if (sxx > 1e-12) {
    out.log_slope = sxy / sxx;
    out.log_slope_std_error = std::sqrt(svar) / sxx;
  }
  return out;
}

CltResult run_clt_test(const ExperimentSpec& spec) {
  require_kind(spec, Kind::kCltTest);
  if (spec.samples < 1) throw std::invalid_argument("run_clt_test: samples must be >= 1");
  spec.validate();
  if (spec.params.field_B != 0.0) throw std::invalid_argument("run_clt_test: requires field_B == 0");
  const ModelParams& p = spec.params;

  const auto chains = static_cast<std::size_t>(spec.replicas);
  const auto total = static_cast<std::size_t>(spec.samples);
  auto per_chain = parallel_map(chains, spec.workers, [&](std::size_t c) {
    const std::size_t count = total / chains + (c < total % chains ? 1 : 0);
    MetropolisSampler sampler(p, replica_mcmc(spec, c));
    std::vector<std::optional<int>> w;
    w.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const WindingNumber wn = winding_number(sampler.next());
      w.push_back(wn.defined() ? std::optional<int>(wn.value()) : std::nullopt);
    }
    return w;
  });

  CltResult out;
  for (const auto& chain : per_chain) {
    for (const auto& w : chain) {
      if (w) out.windings.push_back(*w);
      else ++out.ill_defined;
    }
  }
  if (out.windings.empty()) throw std::runtime_error("run_clt_test: every sample had an ill-defined winding");

  const int K = theory::suggested_support(p.kappa(), p.N);
  out.oracle = theory::winding_distribution(p, K);
  out.empirical = theory::empirical_winding_distribution(out.windings, K);
  const double n = static_cast<double>(out.windings.size());
  out.fraction_zero =
      static_cast<double>(std::count(out.windings.begin(), out.windings.end(), 0)) / n;

  // Bins: (<-kmax), -kmax..kmax, (>kmax).
  const int kmax = std::min(3, K);
  std::vector<double> counts(static_cast<std::size_t>(2 * kmax + 3), 0.0);
  std::vector<double> probs(counts.size(), 0.0);
  auto bin = [&](int w) {
    if (w < -kmax) return std::size_t{0};
    if (w > kmax) return counts.size() - 1;
    return static_cast<std::size_t>(w + kmax + 1);
  };
  for (int w : out.windings) counts[bin(w)] += 1.0;
  for (int k = -K; k <= K; ++k) probs[bin(k)] += out.oracle.probability(k);
  out.chi_square = stats::chi_square_gof(counts, probs);

  rng::Stream jitter(spec.integrator.seed, 0, rng::Domain::kAuxiliary);
  const double c = theory::clt_check_scale(p);
  std::vector<double> z;
  z.reserve(out.windings.size());
  for (int w : out.windings) z.push_back(c * (w + jitter.uniform() - 0.5));
  out.normality = stats::anderson_darling(std::move(z), stats::normal_cdf);
  return out;
}

std::vector<PhaseAverage> run_correlation(const ExperimentSpec& spec) {
  require_kind(spec, Kind::kCorrelation);
  spec.validate();
  const auto chains = static_cast<std::size_t>(spec.replicas);
  const auto per_chain = std::max<std::size_t>(1, static_cast<std::size_t>(spec.samples) / chains);
  std::vector<PhaseAverage> out;
  for (int k : {0, 1}) {
    if (2 * k >= spec.params.N) break;
    const std::uint64_t offset = k == 0 ? 0 : kPhaseStreamOffset;
    const auto means = parallel_map(chains, spec.workers, [&](std::size_t ch) {
      auto sampler = MetropolisSampler::conditional(spec.params, k, replica_mcmc(spec, offset + ch));
      double acc = 0.0;
      for (std::size_t i = 0; i < per_chain; ++i) acc += mid_chain_correlation(sampler.next().angles());
      return acc / static_cast<double>(per_chain);
    });
    out.push_back({k, stats::mean_estimate(means)});
  }
  return out;
}

FieldResponse run_field_response(const ExperimentSpec& spec, double B) {
  require_kind(spec, Kind::kFieldResponse);
  if (!(B >= 0.0) || !std::isfinite(B)) throw std::invalid_argument("run_field_response: B must be >= 0");
  ModelParams p = spec.params;
  p.field_B = B;
  ExperimentSpec s = spec;
  s.params = p;
  s.validate();

  FieldResponse out;
  IntegratorConfig ic = spec.integrator;
  out.horizon = std::min(ic.max_time, theory::timescale(p, 0.0).t_center / 10.0);
  ic.max_time = out.horizon;
  const auto steps = std::max<std::uint64_t>(1, ic.steps());
  ic.record_stride = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(ic.record_stride), steps));
  ObservableSelection obs;
  obs.energy = false;
  obs.correlation = false;
  for (int k : {0, 1}) {
    if (2 * k >= p.N) break;
    const std::uint64_t offset = k == 0 ? 0 : kPhaseStreamOffset;
    struct Replica {
      double magnetization;
      bool exited;
    };
    const auto reps = parallel_map(static_cast<std::size_t>(spec.replicas), spec.workers, [&](std::size_t r) {
      const ChainState x0 = sample_mu_conditional(p, k, replica_mcmc(s, offset + r));
      const Trajectory t = simulate(x0, p, replica_integrator(ic, r), obs);
      const double avg = std::accumulate(t.magnetization.begin(), t.magnetization.end(), 0.0) /
                         static_cast<double>(t.magnetization.size());
      bool exited = false;
      for (const auto& w : t.windings) exited = exited || !w.is(k);
      return Replica{avg, exited};
    });
    std::vector<double> m;
    int exited = 0;
    for (const auto& rep : reps) {
      m.push_back(rep.magnetization);
      exited += rep.exited ? 1 : 0;
    }
    out.phases.push_back({k, stats::mean_estimate(m)});
    out.exited.push_back(exited);
  }
  return out;
}

BadEventResult run_bad_event_watch(const ExperimentSpec& spec, int r, double delta) {
  require_kind(spec, Kind::kBadEventWatch);
  ExperimentSpec s = spec;
  s.r = r;
  s.delta = delta;
  s.validate();
  const ModelParams& p = s.params;
  ObservableSelection obs;
  obs.energy = false;
  obs.correlation = false;
  obs.magnetization = false;
  obs.good_intervals = GoodIntervalWatch{r, delta};
  const int threshold = p.N / (2 * r);

  struct Count {
    std::uint64_t samples;
    std::uint64_t bad;
  };
  const auto counts = parallel_map(static_cast<std::size_t>(s.replicas), s.workers, [&](std::size_t rep) {
    const ChainState x0 = initial_state(p, StartProtocol::kEquilibrium, 0, replica_mcmc(s, rep));
    const Trajectory t = simulate(x0, p, replica_integrator(s.integrator, rep), obs);
    Count c{t.good_intervals.size(), 0};
    for (int g : t.good_intervals) c.bad += g < threshold ? 1 : 0;
    return c;
  });

  BadEventResult out;
  std::vector<double> fractions;
  for (const auto& c : counts) {
    out.samples += c.samples;
    out.in_event += c.bad;
    fractions.push_back(static_cast<double>(c.bad) / static_cast<double>(c.samples));
  }
  out.fraction = static_cast<double>(out.in_event) / static_cast<double>(out.samples);
  out.per_replica = stats::mean_estimate(fractions);
  out.horizon = static_cast<double>(s.integrator.steps()) * s.integrator.dt;
  return out;
}

std::vector<int> distinct_windings(const Trajectory& t) {
  std::set<int> seen;
  for (const auto& w : t.windings)
    if (w.defined()) seen.insert(w.value());
  return {seen.begin(), seen.end()};
}

}  // namespace xychain::experiments
