#pragma once

// Goodness-of-fit tests and small estimators used by the experiment drivers.

#include <functional>
#include <span>
#include <vector>

namespace xychain::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double x, int dof);

/// Pearson goodness-of-fit of counts against bin probabilities. Adjacent
/// bins are pooled (outermost first) until every pooled expectation is at
/// least min_expected. Probabilities are renormalized to sum to one.
TestResult chi_square_gof(std::span<const double> counts, std::span<const double> probabilities,
                          double min_expected = 5.0);

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_sf(double lambda);

/// One-sample KS test. The p-value uses Stephens' small-sample scaling
/// (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Anderson-Darling test for a fully specified continuous cdf, with the
/// Marsaglia & Marsaglia (2004) p-value.
TestResult anderson_darling(std::vector<double> samples, const std::function<double(double)>& cdf);
/// P(A^2 <= z) for sample size n.
double anderson_darling_cdf(int n, double z);

double normal_cdf(double z);

struct ExponentialFit {
  double rate = 0.0;
  int n_events = 0;
  int n_censored = 0;
  double total_time = 0.0;
};

/// Censoring-aware MLE: rate = (#events) / (sum of all observed times).
ExponentialFit fit_exponential(std::span<const double> times, std::span<const bool> censored);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> values);

}  // namespace xychain::stats
