#pragma once

// Euler-Maruyama integration of the overdamped Langevin chain and
// first-exit detection for the winding number.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xychain/model.hpp"

namespace xychain {

/// Drift coefficient of dX = -mobility grad H dt + sigma dB. With noise
/// amplitude sigma the Gibbs weight exp(-H / (2 sigma^2)) is stationary only
/// for mobility sigma^2 / (2 * 2 sigma^2) = 1/4.
inline constexpr double kMobility = 0.25;

/// Step-size budget: J dt <= kMaxCouplingStep and sigma sqrt(dt) <= kMaxNoiseStep.
inline constexpr double kMaxCouplingStep = 0.02;
inline constexpr double kMaxNoiseStep = 0.05;

/// Largest dt allowed by the budget.
double max_stable_dt(const ModelParams& p);
/// Half of max_stable_dt.
double default_dt(const ModelParams& p);

struct IntegratorConfig {
  double dt = 1e-4;
  double max_time = 1.0;
  int record_stride = 1;
  std::uint64_t seed = 0;
  /// Replica index; with seed it keys the noise stream.
  std::uint64_t replica = 0;

  /// Throws std::invalid_argument citing the violated rule.
  void validate(const ModelParams& p) const;
  [[nodiscard]] std::uint64_t steps() const;

  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

struct GoodIntervalWatch {
  int r = 8;
  double delta = 0.3;
};

struct ObservableSelection {
  bool energy = true;
  bool correlation = true;
  bool magnetization = true;
  std::optional<GoodIntervalWatch> good_intervals;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<WindingNumber> windings;
  std::vector<double> energy;
  std::vector<double> correlation;
  std::vector<double> magnetization;
  std::vector<int> good_intervals;

  struct Diagnostics {
    std::uint64_t steps = 0;
    /// Consecutive steps whose windings differ by more than one.
    std::uint64_t multi_jumps = 0;
    std::uint64_t ill_defined_steps = 0;
  } diagnostics;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

struct ExitRecord {
  int start_winding = 0;
  /// First step time with winding != start, or the horizon when censored.
  double exit_time = 0.0;
  bool censored = true;
  WindingNumber exit_target = WindingNumber::ill_defined();
};

/// One explicit Euler-Maruyama step:
///   x_i <- wrap(x_i - kMobility * dH/dx_i * dt + sigma sqrt(dt) noise_i).
ChainState em_step(const ChainState& x, const ModelParams& p, double dt, std::span<const double> noise);

/// In-place variant; grad_scratch must have size N.
void em_step_inplace(std::span<double> x, const ModelParams& p, double dt, std::span<const double> noise,
                     std::span<double> grad_scratch);

Trajectory simulate(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg,
                    const ObservableSelection& observables = {});

/// Wrapped bond increments x_{i} - x_{i-1} of every recorded state (all N
/// bonds per record, recorded every record_stride steps after step 0),
/// concatenated in time order.
std::vector<double> bond_snapshots(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg);

ExitRecord first_exit(const ChainState& x0, const ModelParams& p, const IntegratorConfig& cfg, int k);

}  // namespace xychain
