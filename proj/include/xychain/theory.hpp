#pragma once

// Deterministic oracles: Bessel functions, bond-law moments, the exact
// winding law via convolution powers, and the metastable time scales.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "xychain/model.hpp"

namespace xychain::theory {

/// Modified Bessel function of the first kind I_order(x), order in {0, 1}.
double bessel_i(int order, double x);
/// exp(-x) I_order(x); finite for all x >= 0.
double bessel_i_scaled(int order, double x);

/// Moments of g, the density of rho / (2 pi) on [-1/2, 1/2] when rho has
/// density proportional to exp(kappa cos rho).
struct MomentSet {
  double kappa = 0.0;
  /// Normalizer m = integral of exp(kappa cos x) over the circle = 2 pi I_0(kappa).
  double m = 0.0;
  double log_m = 0.0;
  /// Var(rho / 2 pi) = integral of y^2 g(y).
  double s2 = 0.0;
  /// E|rho / 2 pi|^3.
  double beta3 = 0.0;
};

MomentSet moments(double kappa);

/// Adaptive Simpson quadrature to an absolute tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                          int max_depth = 48);

/// g^{*n} sampled on the lattice y = (i - origin) * step, built from the
/// exact cell masses of g (cells aligned with the support edges) so that the
/// result is the n-fold convolution of the piecewise-constant projection of
/// g. Exact for kappa = 0; O(step^2) otherwise.
struct GridDensity {
  double step = 0.0;
  std::int64_t origin = 0;
  std::vector<double> values;

  [[nodiscard]] double at_index(std::int64_t offset) const;
  /// Value at the integer y = k (k / step must land on the lattice).
  [[nodiscard]] double at_integer(int k) const;
  [[nodiscard]] std::int64_t half_extent() const noexcept { return origin; }
};

/// Periodic grid covering at least [-half_width, half_width] with step
/// 2^-log2_cells. Mass beyond the period aliases back in.
GridDensity convolution_power_grid(double kappa, int n, double half_width, int log2_cells = 10);

/// Shape diagnostics of a grid density about its origin, relative to the peak.
struct GridShape {
  double peak = 0.0;
  bool peak_at_origin = false;
  /// max |f(y) - f(-y)| / peak.
  double asymmetry = 0.0;
  /// Largest increase of f moving outward from the origin, / peak.
  double max_rise = 0.0;
};

GridShape grid_shape(const GridDensity& g);

class SupportTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { kOracle, kEmpirical };

struct WindingDistribution {
  int K = 0;
  /// probabilities[k + K] for k in [-K, K].
  std::vector<double> probabilities;
  Provenance provenance = Provenance::kOracle;

  // Oracle diagnostics, relative to the peak probability.
  double tail_mass = 0.0;
  double alias_change = 0.0;
  /// Change between the last two Richardson extrapolates.
  double richardson_change = 0.0;

  [[nodiscard]] double probability(int k) const;
  [[nodiscard]] double mean() const;
  [[nodiscard]] double variance() const;
};

/// K large enough that the law beyond +-K is negligible (about 8 standard
/// deviations of the unconditioned sum, at least 2).
int suggested_support(double kappa, int n);

/// mu(W = k) = g^{*N}(k) / sum_j g^{*N}(j) for |k| <= K. Values are
/// Richardson extrapolates of grids with steps 2^-L and 2^-(L+1); starting at
/// L = 10 the step is halved until consecutive extrapolates agree to 1e-8 of
/// the peak. The pad is doubled at the finest step to measure aliasing.
/// Throws SupportTooSmall when the mass beyond K exceeds 1e-9.
WindingDistribution winding_distribution(double kappa, int n, int K);
WindingDistribution winding_distribution(const ModelParams& p, int K);

/// Empirical law from integer samples; samples outside [-K, K] are dropped
/// from the histogram but counted in tail_mass.
WindingDistribution empirical_winding_distribution(const std::vector<int>& samples, int K);

/// 2 pi sqrt(J / (2 sigma^2 N)), the factor that standardizes W.
double clt_check_scale(const ModelParams& p);

struct TimescalePrediction {
  double log_center = 0.0;
  double log_lower = 0.0;
  double log_upper = 0.0;
  double t_center = 0.0;
  double t_lower = 0.0;
  double t_upper = 0.0;
};

/// exp((J / sigma^2)(1 +- epsilon) - log N), computed in log space.
TimescalePrediction timescale(const ModelParams& p, double epsilon);

}  // namespace xychain::theory
