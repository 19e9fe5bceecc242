#pragma once

// Experiment drivers: replica harnesses that combine the samplers, the
// integrator and the oracles into the measurements reported by the CLI.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "xychain/dynamics.hpp"
#include "xychain/equilibrium.hpp"
#include "xychain/model.hpp"
#include "xychain/stats.hpp"
#include "xychain/theory.hpp"

namespace xychain::experiments {

enum class Kind {
  kWindingTrace,
  kExitHistogram,
  kScalingSweep,
  kCltTest,
  kCorrelation,
  kFieldResponse,
  kBadEventWatch,
};

std::string_view to_string(Kind kind);
/// Accepts the hyphenated names ("winding-trace", ...). Throws std::invalid_argument.
Kind kind_from_string(std::string_view name);
std::vector<std::string_view> kind_names();

enum class StartProtocol { kConditional, kEquilibrium };

struct GridPoint {
  int N = 0;
  double J = 0.0;
  double sigma = 0.0;

  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Pass/fail windows applied to experiment outputs.
struct Thresholds {
  double p_min = 0.01;
  double censored_max = 0.10;
  double ratio_min = 1.4;
  double ratio_max = 2.9;
  double slope_min = 0.6;
  double slope_max = 1.4;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct ExperimentSpec {
  Kind kind = Kind::kWindingTrace;
  ModelParams params;
  IntegratorConfig integrator;
  McmcConfig mcmc;
  int replicas = 1;
  std::vector<GridPoint> sweep_grid;

  /// Phase used for conditional starts and exits.
  int k = 0;
  StartProtocol start = StartProtocol::kConditional;
  /// Bad-event block length and tolerance.
  int r = 8;
  double delta = 0.3;
  /// Width of the predicted time-scale window.
  double epsilon = 0.5;
  /// Sweep horizon in units of each grid point's t_center.
  double horizon_factor = 50.0;
  /// Sweep step as a multiple of each grid point's default_dt.
  double dt_scale = 1.0;
  /// Equilibrium samples per phase (correlation) or in total (clt-test).
  int samples = 1000;
  /// Worker threads; 0 selects the hardware concurrency. Results do not depend on it.
  int workers = 0;
  Thresholds thresholds;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  /// Censoring-aware MLE: uncensored exits / total observed time.
  double rate_mle = 0.0;
  double ks_statistic = 0.0;
  double ks_pvalue = 0.0;
  int n_censored = 0;
  int n_events = 0;
};

/// Fits an exponential to exit records sharing one horizon. The KS test
/// compares uncensored exits with Exp(rate_mle) truncated at the horizon,
/// which is the plain exponential when nothing is censored. Throws
/// DegenerateFit when every record is censored.
FitResult fit_exit_times(const std::vector<ExitRecord>& records);

struct ExitHistogram {
  std::vector<ExitRecord> records;
  FitResult fit;
  stats::MeanEstimate mean_exit;
  double censored_fraction = 0.0;
  double horizon = 0.0;
  theory::TimescalePrediction prediction;
  [[nodiscard]] bool exponential_ok(const Thresholds& t) const {
    return fit.ks_pvalue > t.p_min && censored_fraction < t.censored_max;
  }
};

struct SweepRow {
  GridPoint point;
  double mean_exit = 0.0;
  double std_error = 0.0;
  int replicas = 0;
  int n_censored = 0;
  double dt = 0.0;
  double horizon = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// mean_exit[i] / mean_exit[i + 1] for consecutive rows.
  std::vector<double> consecutive_ratios;
  /// Least-squares slope of log(mean_exit) against J / sigma^2 (needs two distinct ratios).
  std::optional<double> log_slope;
  std::optional<double> log_slope_std_error;
};

struct CltResult {
  theory::WindingDistribution empirical;
  theory::WindingDistribution oracle;
  /// Anderson-Darling of c (W + U - 1/2) against N(0, 1), U uniform, c = clt_check_scale.
  stats::TestResult normality;
  /// Pearson test over k in [-3, 3] with both tails pooled into end bins.
  stats::TestResult chi_square;
  double fraction_zero = 0.0;
  std::vector<int> windings;
  std::size_t ill_defined = 0;
};

struct PhaseAverage {
  int k = 0;
  stats::MeanEstimate value;
};

struct FieldResponse {
  std::vector<PhaseAverage> phases;
  double horizon = 0.0;
  /// Replicas whose winding left the starting phase within the horizon.
  std::vector<int> exited;
};

struct BadEventResult {
  double fraction = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t in_event = 0;
  stats::MeanEstimate per_replica;
  double horizon = 0.0;
};

Trajectory run_winding_trace(const ExperimentSpec& spec);
ExitHistogram run_exit_histogram(const ExperimentSpec& spec);
SweepResult run_scaling_sweep(const ExperimentSpec& spec);
CltResult run_clt_test(const ExperimentSpec& spec);
/// Mean of cos(x_1 - x_{N/2}) under mu|W=k for k in {0, 1}; the standard
/// error is taken across independent chains (spec.replicas of them).
std::vector<PhaseAverage> run_correlation(const ExperimentSpec& spec);
FieldResponse run_field_response(const ExperimentSpec& spec, double B);
BadEventResult run_bad_event_watch(const ExperimentSpec& spec, int r, double delta);

/// Distinct defined windings in a trajectory.
std::vector<int> distinct_windings(const Trajectory& t);

/// Test-facing helpers.
int resolve_workers(int requested);

/// Evaluates fn(i) for i in [0, n) on a pool of workers and returns the
/// results in index order. The first exception is rethrown after all workers stop.
template <class Fn>
auto parallel_map(std::size_t n, int workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<std::optional<T>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, std::min(resolve_workers(workers), static_cast<int>(std::max<std::size_t>(n, 1)))));
  if (count == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace xychain::experiments
