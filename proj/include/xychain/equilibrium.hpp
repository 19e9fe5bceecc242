#pragma once

// Samplers for the Gibbs measure mu ~ exp(-H / (2 sigma^2)), its
// winding-conditioned restrictions, and the von Mises bond law.

#include <cstdint>
#include <optional>
#include <vector>

#include "xychain/model.hpp"
#include "xychain/rng.hpp"

namespace xychain {

/// Density proportional to exp(kappa cos x) on (-pi, pi].
struct VonMisesLaw {
  double kappa = 0.0;
};

/// Exact draw by the Best-Fisher (1979) wrapped-Cauchy envelope; kappa = 0
/// gives the uniform law.
Angle sample_von_mises(const VonMisesLaw& law, rng::Stream& stream);

struct BridgeDraw {
  /// Representatives rho_i in (-pi, pi] of the N bond increments.
  std::vector<double> increments;
  int winding = 0;
  /// Proposals consumed, including the accepted one.
  std::uint64_t attempts = 0;
};

/// Exact draw of N i.i.d. von Mises increments conditioned to close
/// (sum = 0 on the circle). Draws N-1 free increments, closes the loop with
/// the forced last increment, and accepts with probability
/// h(last) / max h = exp(kappa (cos(last) - 1)).
BridgeDraw sample_bridge(double kappa, int n, rng::Stream& stream);

/// Equilibrium state from a bridge draw and an independent uniform base
/// angle. Requires field_B == 0.
ChainState sample_bridge_state(const ModelParams& p, rng::Stream& stream);

struct McmcConfig {
  double proposal_width = 1.0;
  int burn_in_sweeps = 200;
  int thinning_sweeps = 10;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool auto_tune = true;
  double target_acceptance = 0.4;

  void validate() const;

  friend bool operator==(const McmcConfig&, const McmcConfig&) = default;
};

/// Single-site Metropolis chain with systematic scan. Each sweep is followed
/// by a uniform global rotation, accepted with the Metropolis rule (always
/// when field_B == 0). The proposal width is tuned toward target_acceptance
/// during burn-in and then frozen.
class MetropolisSampler {
 public:
  /// Targets mu. Starts from an aligned chain at a uniform random angle.
  MetropolisSampler(const ModelParams& p, const McmcConfig& cfg);
  /// Targets mu restricted to {W = k}: starts at the phase-k minimizer and
  /// rejects every proposal that would change the winding.
  static MetropolisSampler conditional(const ModelParams& p, int k, const McmcConfig& cfg);

  /// Advances thinning_sweeps sweeps (after burn-in on first call).
  const ChainState& next();
  void sweep();

  [[nodiscard]] const ChainState& state() const noexcept { return state_; }
  [[nodiscard]] double proposal_width() const noexcept { return width_; }
  /// Single-site acceptance rate since burn-in ended.
  [[nodiscard]] double acceptance_rate() const noexcept;
  [[nodiscard]] std::optional<int> sector() const noexcept { return sector_; }

 private:
  MetropolisSampler(const ModelParams& p, const McmcConfig& cfg, std::optional<int> sector);
  void burn_in();
  void sweep_once();
  void global_rotation();
  void apply_pending_rotation();
  void refresh_cache();

  ModelParams params_;
  McmcConfig cfg_;
  std::optional<int> sector_;
  rng::Stream stream_;
  ChainState state_;
  double width_;
  bool burned_in_ = false;
  std::uint64_t proposed_ = 0;
  std::uint64_t accepted_ = 0;
  std::vector<double> cos_;
  std::vector<double> sin_;
  double pending_rotation_ = 0.0;
};

/// One state from a fresh unconditioned chain.
ChainState sample_mu(const ModelParams& p, const McmcConfig& cfg);
/// One state from a fresh chain restricted to {W = k}; needs |k| < N/2.
ChainState sample_mu_conditional(const ModelParams& p, int k, const McmcConfig& cfg);

}  // namespace xychain
