#include "xychain/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xychain {

Angle sample_von_mises(const VonMisesLaw& law, rng::Stream& stream) {
  const double kappa = law.kappa;
  if (!(kappa >= 0.0)) throw std::invalid_argument("sample_von_mises: kappa must be >= 0");
  if (kappa < 1e-8) return Angle(stream.uniform(-kPi, kPi));

  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double z = std::cos(kPi * stream.uniform());
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = stream.uniform_open();
    const double u3 = stream.uniform();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = std::acos(std::clamp(f, -1.0, 1.0));
      return Angle(u3 < 0.5 ? -theta : theta);
    }
  }
}

BridgeDraw sample_bridge(double kappa, int n, rng::Stream& stream) {
  if (n < 1) throw std::invalid_argument("sample_bridge: n must be >= 1");
  const VonMisesLaw law{kappa};
  BridgeDraw d;
  d.increments.resize(static_cast<std::size_t>(n));
  for (;;) {
    ++d.attempts;
    double sum = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double rho = sample_von_mises(law, stream).value();
      d.increments[static_cast<std::size_t>(i)] = rho;
      sum += rho;
    }
    const double last = wrap_fast(-sum);
    if (stream.uniform() < std::exp(kappa * (std::cos(last) - 1.0))) {
      d.increments.back() = last;
      d.winding = static_cast<int>(std::nearbyint((sum + last) / kTwoPi));
      return d;
    }
  }
}

ChainState sample_bridge_state(const ModelParams& p, rng::Stream& stream) {
  p.validate();
  if (p.field_B != 0.0) throw std::invalid_argument("sample_bridge_state: requires field_B == 0");
  const BridgeDraw d = sample_bridge(p.kappa(), p.N, stream);
  std::vector<double> x(static_cast<std::size_t>(p.N));
  // x_0 = x_N = Xi; x_i = Xi + S_i.
  double pos = stream.uniform(-kPi, kPi);
  for (int i = 0; i < p.N; ++i) {
    pos += d.increments[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(i)] = pos;
  }
  return ChainState(std::move(x));
}

void McmcConfig::validate() const {
  if (!(proposal_width > 0.0)) throw std::invalid_argument("McmcConfig: proposal_width must be > 0");
  if (burn_in_sweeps < 1) throw std::invalid_argument("McmcConfig: burn_in_sweeps must be >= 1");
  if (thinning_sweeps < 1) throw std::invalid_argument("McmcConfig: thinning_sweeps must be >= 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw std::invalid_argument("McmcConfig: target_acceptance must be in (0, 1)");
}

MetropolisSampler::MetropolisSampler(const ModelParams& p, const McmcConfig& cfg)
    : MetropolisSampler(p, cfg, std::nullopt) {}

MetropolisSampler::MetropolisSampler(const ModelParams& p, const McmcConfig& cfg, std::optional<int> sector)
    : params_(p),
      cfg_(cfg),
      sector_(sector),
      stream_(cfg.seed, cfg.stream, rng::Domain::kMcmc),
      width_(std::min(cfg.proposal_width, kPi)) {
  p.validate();
  cfg.validate();
  const double offset = stream_.uniform(-kPi, kPi);
  if (sector_) {
    if (2 * std::abs(*sector_) >= p.N) throw std::invalid_argument("sample_mu_conditional: need |k| < N/2");
    state_ = ChainState::phase_minimizer(p.N, *sector_, offset);
  } else {
    state_ = ChainState::constant(p.N, offset);
  }
}

MetropolisSampler MetropolisSampler::conditional(const ModelParams& p, int k, const McmcConfig& cfg) {
  return MetropolisSampler(p, cfg, k);
}

double MetropolisSampler::acceptance_rate() const noexcept {
  return proposed_ ? static_cast<double>(accepted_) / static_cast<double>(proposed_) : 0.0;
}

void MetropolisSampler::refresh_cache() {
  const auto& x = state_.raw();
  cos_.resize(x.size());
  sin_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cos_[i] = std::cos(x[i]);
    sin_[i] = std::sin(x[i]);
  }
}

void MetropolisSampler::sweep_once() {
  auto& x = state_.raw();
  if (cos_.size() != x.size()) refresh_cache();
  const int n = params_.N;
  const double J = params_.J;
  const double B = params_.field_B;
  const double beta = params_.gibbs_beta();
  for (int i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(i == 0 ? n - 1 : i - 1);
    const auto r = static_cast<std::size_t>(i == n - 1 ? 0 : i + 1);
    const auto c = static_cast<std::size_t>(i);
    const double old = x[c];
    const double prop = wrap_fast(old + stream_.uniform(-width_, width_));
    ++proposed_;
    if (sector_) {
      const double before = wrap_fast(old - x[l]) + wrap_fast(x[r] - old);
      const double after = wrap_fast(prop - x[l]) + wrap_fast(x[r] - prop);
      if (std::abs(after - before) > kPi) {
        stream_.next_u64();  // keep the draw count per site fixed
        continue;
      }
    }
    const double cp = std::cos(prop);
    const double sp = std::sin(prop);
    // cos(a - b) = cos a cos b + sin a sin b, with neighbours summed first.
    const double cn = cos_[l] + cos_[r];
    const double sn = sin_[l] + sin_[r];
    double dH = -J * ((cp - cos_[c]) * cn + (sp - sin_[c]) * sn);
    if (B != 0.0) dH -= B * (cp - cos_[c]);
    const double u = stream_.uniform();
    if (dH <= 0.0 || u < std::exp(-beta * dH)) {
      x[c] = prop;
      cos_[c] = cp;
      sin_[c] = sp;
      ++accepted_;
    }
  }
  global_rotation();
}

void MetropolisSampler::sweep() {
  sweep_once();
  apply_pending_rotation();
}

void MetropolisSampler::global_rotation() {
  const double c = stream_.uniform(-kPi, kPi);
  const double u = stream_.uniform();
  if (params_.field_B == 0.0) {
    // Energy is invariant; defer the shift until the state is observed.
    pending_rotation_ = wrap_fast(pending_rotation_ + c);
    return;
  }
  auto& x = state_.raw();
  double dm = 0.0;
  for (double a : x) dm += std::cos(a + c) - std::cos(a);
  const double dH = -params_.field_B * dm;
  if (!(dH <= 0.0 || u < std::exp(-params_.gibbs_beta() * dH))) return;
  for (double& a : x) a = wrap_fast(a + c);
  refresh_cache();
}

void MetropolisSampler::apply_pending_rotation() {
  if (pending_rotation_ == 0.0) return;
  for (double& a : state_.raw()) a = wrap_fast(a + pending_rotation_);
  pending_rotation_ = 0.0;
  refresh_cache();
}

void MetropolisSampler::burn_in() {
  constexpr int kTuneBlock = 10;
  for (int s = 0; s < cfg_.burn_in_sweeps; ++s) {
    sweep_once();
    if (cfg_.auto_tune && (s + 1) % kTuneBlock == 0) {
      const double acc = acceptance_rate();
      width_ = std::clamp(width_ * std::exp(2.0 * (acc - cfg_.target_acceptance)), 1e-4, kPi);
      proposed_ = accepted_ = 0;
    }
  }
  proposed_ = accepted_ = 0;
  apply_pending_rotation();
  burned_in_ = true;
}

const ChainState& MetropolisSampler::next() {
  if (!burned_in_) burn_in();
  for (int s = 0; s < cfg_.thinning_sweeps; ++s) sweep_once();
  apply_pending_rotation();
  return state_;
}

ChainState sample_mu(const ModelParams& p, const McmcConfig& cfg) {
  MetropolisSampler s(p, cfg);
  return s.next();
}

ChainState sample_mu_conditional(const ModelParams& p, int k, const McmcConfig& cfg) {
  auto s = MetropolisSampler::conditional(p, k, cfg);
  return s.next();
}

}  // namespace xychain
