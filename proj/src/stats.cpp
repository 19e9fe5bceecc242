#include "xychain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace xychain::stats {

double chi_square_sf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_sf: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

TestResult chi_square_gof(std::span<const double> counts, std::span<const double> probabilities,
                          double min_expected) {
  if (counts.size() != probabilities.size() || counts.size() < 2)
    throw std::invalid_argument("chi_square_gof: need >= 2 bins of matching size");
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double psum = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (!(n > 0.0) || !(psum > 0.0)) throw std::invalid_argument("chi_square_gof: empty sample or zero mass");

  std::vector<double> obs(counts.begin(), counts.end());
  std::vector<double> exp(probabilities.size());
  for (std::size_t i = 0; i < exp.size(); ++i) exp[i] = n * probabilities[i] / psum;

  // Pool from whichever end currently has the smaller expectation.
  auto pool_front = [&] {
    obs[1] += obs[0];
    exp[1] += exp[0];
    obs.erase(obs.begin());
    exp.erase(exp.begin());
  };
  auto pool_back = [&] {
    obs[obs.size() - 2] += obs.back();
    exp[exp.size() - 2] += exp.back();
    obs.pop_back();
    exp.pop_back();
  };
  while (exp.size() > 2 && (exp.front() < min_expected || exp.back() < min_expected)) {
    if (exp.front() <= exp.back()) pool_front();
    else pool_back();
  }
  // Interior sparse bins merge into their right neighbour.
  for (std::size_t i = 1; i + 1 < exp.size();) {
    if (exp[i] < min_expected) {
      exp[i + 1] += exp[i];
      obs[i + 1] += obs[i];
      exp.erase(exp.begin() + static_cast<std::ptrdiff_t>(i));
      obs.erase(obs.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }

  TestResult r;
  for (std::size_t i = 0; i < exp.size(); ++i) {
    const double d = obs[i] - exp[i];
    r.statistic += d * d / exp[i];
  }
  r.dof = static_cast<int>(exp.size()) - 1;
  r.p_value = r.dof >= 1 ? chi_square_sf(r.statistic, r.dof) : 1.0;
  return r;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double fi = static_cast<double>(i);
    d = std::max({d, (fi + 1.0) / n - f, f - fi / n});
  }
  const double rn = std::sqrt(n);
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
  return r;
}

namespace {

// Marsaglia & Marsaglia, "Evaluating the Anderson-Darling distribution", JSS 2004.
double ad_inf(double z) {
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z);
  }
  return std::exp(-std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z));
}

double ad_errfix(int n, double x) {
  const double dn = n;
  if (x > 0.8) {
    return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / dn;
  }
  const double c = 0.01265 + 0.1757 / dn;
  if (x < c) {
    double t = x / c;
    t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
    return t * (0.0037 / (dn * dn) + 0.00078 / dn + 0.00006) / dn;
  }
  double t = (x - c) / (0.8 - c);
  t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
  return t * (0.04213 + 0.01365 / dn) / dn;
}

}  // namespace

double anderson_darling_cdf(int n, double z) {
  if (z <= 0.0) return 0.0;
  const double x = ad_inf(z);
  return std::clamp(x + ad_errfix(n, x), 0.0, 1.0);
}

TestResult anderson_darling(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("anderson_darling: no samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  constexpr double kFloor = 1e-300;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = std::max(cdf(samples[i]), kFloor);
    const double hi = std::max(1.0 - cdf(samples[n - 1 - i]), kFloor);
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(lo) + std::log(hi));
  }
  TestResult r;
  r.statistic = -static_cast<double>(n) - s / static_cast<double>(n);
  r.p_value = 1.0 - anderson_darling_cdf(static_cast<int>(n), r.statistic);
  return r;
}

double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

ExponentialFit fit_exponential(std::span<const double> times, std::span<const bool> censored) {
  if (times.size() != censored.size()) throw std::invalid_argument("fit_exponential: size mismatch");
  ExponentialFit f;
  for (std::size_t i = 0; i < times.size(); ++i) {
    f.total_time += times[i];
    if (censored[i]) ++f.n_censored;
    else ++f.n_events;
  }
  f.rate = (f.n_events > 0 && f.total_time > 0.0) ? f.n_events / f.total_time : 0.0;
  return f;
}

MeanEstimate mean_estimate(std::span<const double> values) {
  MeanEstimate e;
  e.n = values.size();
  if (e.n == 0) return e;
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.std_error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  }
  return e;
}

}  // namespace xychain::stats
