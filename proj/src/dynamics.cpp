#include "xychain/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "xychain/rng.hpp"

namespace xychain {

double max_stable_dt(const ModelParams& p) {
  const double by_coupling = kMaxCouplingStep / p.J;
  const double by_noise = (kMaxNoiseStep / p.sigma) * (kMaxNoiseStep / p.sigma);
  return std::min(by_coupling, by_noise);
}

double default_dt(const ModelParams& p) { return 0.5 * max_stable_dt(p); }

void IntegratorConfig::validate(const ModelParams& p) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("IntegratorConfig: " + what); };
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be > 0");
  if (!(max_time >= 0.0) || !std::isfinite(max_time)) fail("max_time must be >= 0");
  if (record_stride < 1) fail("record_stride must be >= 1");
  constexpr double kSlack = 1.0 + 1e-12;
  if (p.J * dt > kMaxCouplingStep * kSlack) {
    std::ostringstream m;
    m << "step budget J*dt <= " << kMaxCouplingStep << " violated (J*dt = " << p.J * dt << ")";
    fail(m.str());
  }
  if (p.sigma * std::sqrt(dt) > kMaxNoiseStep * kSlack) {
    std::ostringstream m;
    m << "step budget sigma*sqrt(dt) <= " << kMaxNoiseStep << " violated (sigma*sqrt(dt) = "
      << p.sigma * std::sqrt(dt) << ")";
    fail(m.str());
  }
  if (max_time > 0.0 && record_stride * dt > max_time * kSlack) fail("record_stride*dt must be <= max_time");
}

std::uint64_t IntegratorConfig::steps() const {
  return static_cast<std::uint64_t>(std::floor(max_time / dt * (1.0 + 1e-12)));
}

void em_step_inplace(std::span<double> x, const ModelParams& p, double dt, std::span<const double> noise,
                     std::span<double> grad_scratch) {
  grad_hamiltonian(x, p, grad_scratch);
  const double drift = kMobility * dt;
  const double amp = p.sigma * std::sqrt(dt);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = wrap_fast(x[i] - drift * grad_scratch[i] + amp * noise[i]);
}

ChainState em_step(const ChainState& x, const ModelParams& p, double dt, std::span<const double> noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be > 0");
  if (noise.size() != static_cast<std::size_t>(x.size())) throw std::invalid_argument("em_step: noise size != N");
  std::vector<double> v(x.angles().begin(), x.angles().end());
  std::vector<double> g(v.size());
  em_step_inplace(v, p, dt, noise, g);
  return ChainState(std::move(v));
}

namespace {

void record_sample(Trajectory& tr, double t, std::span<const double> x, WindingNumber w, const ModelParams& p,
                   const ObservableSelection& obs, const ChainState* state_view) {
  tr.times.push_back(t);
  tr.windings.push_back(w);
  if (obs.energy) tr.energy.push_back(hamiltonian(*state_view, p));
  if (obs.correlation) tr.correlation.push_back(mid_chain_correlation(x));
  if (obs.magnetization) tr.magnetization.push_back(magnetization(x));
  if (obs.good_intervals) tr.good_intervals.push_back(good_interval_count(x, obs.good_intervals->r, obs.good_intervals->delta));
}

}  // namespace

Trajectory simulate(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg,
                    const ObservableSelection& observables) {
  p.validate();
  cfg.validate(p);
  if (x0.size() != p.N) throw std::invalid_argument("simulate: state size != N");

  ChainState state = x0;
  auto& x = state.raw();
  std::vector<double> noise(x.size()), grad(x.size());
  Trajectory tr;
  WindingNumber w = winding_number(state);
  record_sample(tr, 0.0, x, w, p, observables, &state);

  const std::uint64_t n_steps = cfg.steps();
  for (std::uint64_t s = 1; s <= n_steps; ++s) {
    rng::step_normals(cfg.seed, cfg.replica, s, noise);
    em_step_inplace(x, p, cfg.dt, noise, grad);
    const WindingNumber next = winding_number(x);
    if (!next.defined()) ++tr.diagnostics.ill_defined_steps;
    else if (w.defined() && std::abs(next.value() - w.value()) > 1) ++tr.diagnostics.multi_jumps;
    w = next;
    if (s % static_cast<std::uint64_t>(cfg.record_stride) == 0)
      record_sample(tr, static_cast<double>(s) * cfg.dt, x, w, p, observables, &state);
  }
  tr.diagnostics.steps = n_steps;
  return tr;
}

std::vector<double> bond_snapshots(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg) {
  p.validate();
  cfg.validate(p);
  if (x0.size() != p.N) throw std::invalid_argument("bond_snapshots: state size != N");
  std::vector<double> x(x0.angles().begin(), x0.angles().end());
  std::vector<double> noise(x.size()), grad(x.size()), bonds;
  const std::uint64_t n_steps = cfg.steps();
  const auto stride = static_cast<std::uint64_t>(cfg.record_stride);
  bonds.reserve(static_cast<std::size_t>(n_steps / stride) * x.size());
  for (std::uint64_t s = 1; s <= n_steps; ++s) {
    rng::step_normals(cfg.seed, cfg.replica, s, noise);
    em_step_inplace(x, p, cfg.dt, noise, grad);
    if (s % stride != 0) continue;
    double prev = x.back();
    for (double a : x) {
      bonds.push_back(wrap_fast(a - prev));
      prev = a;
    }
  }
  return bonds;
}

ExitRecord first_exit(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg, int k) {
  p.validate();
  cfg.validate(p);
  if (x0.size() != p.N) throw std::invalid_argument("first_exit: state size != N");
  if (!winding_number(x0).is(k)) throw std::invalid_argument("first_exit: initial winding differs from k");

  std::vector<double> x(x0.angles().begin(), x0.angles().end());
  std::vector<double> noise(x.size()), grad(x.size());
  ExitRecord rec;
  rec.start_winding = k;
  const std::uint64_t n_steps = cfg.steps();
  for (std::uint64_t s = 1; s <= n_steps; ++s) {
    rng::step_normals(cfg.seed, cfg.replica, s, noise);
    em_step_inplace(x, p, cfg.dt, noise, grad);
    const WindingNumber w = winding_number(x);
    if (!w.is(k)) {
      rec.exit_time = static_cast<double>(s) * cfg.dt;
      rec.censored = false;
      rec.exit_target = w;
      return rec;
    }
  }
  rec.exit_time = static_cast<double>(n_steps) * cfg.dt;
  return rec;
}

}  // namespace xychain
