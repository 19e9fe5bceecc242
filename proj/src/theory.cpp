#include "xychain/theory.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <sstream>

#include <fftw3.h>

namespace xychain::theory {

namespace {

constexpr double kSeriesLimit = 20.0;

double bessel_series(int order, double x) {
  const double q = 0.25 * x * x;
  double term = order == 0 ? 1.0 : 0.5 * x;
  double sum = term;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k + order));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// e^{-x} I_order(x) from the large-argument expansion.
double bessel_asymptotic_scaled(int order, double x) {
  const double mu = 4.0 * order * order;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * -(mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(2.0 * kPi * x);
}

void check_order(int order, double x) {
  if (order != 0 && order != 1) throw std::invalid_argument("bessel_i: order must be 0 or 1");
  if (!(x >= 0.0)) throw std::invalid_argument("bessel_i: argument must be >= 0");
}

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// FFTW's planner is not re-entrant.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct RealFft {
  explicit RealFft(std::size_t n) : size(n) {
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    {
      std::lock_guard lock(fftw_mutex());
      fftw_destroy_plan(forward);
      fftw_destroy_plan(backward);
    }
    fftw_free(real);
    fftw_free(spec);
  }
  std::complex<double> bin(std::size_t f) const { return {spec[f][0], spec[f][1]}; }
  void set_bin(std::size_t f, std::complex<double> v) {
    spec[f][0] = v.real();
    spec[f][1] = v.imag();
  }

  std::size_t size;
  double* real;
  fftw_complex* spec;
  fftw_plan forward;
  fftw_plan backward;
};

std::complex<double> int_pow(std::complex<double> z, int n) {
  std::complex<double> result{1.0, 0.0};
  while (n > 0) {
    if (n & 1) result *= z;
    z *= z;
    n >>= 1;
  }
  return result;
}

// Values M_n(q), q = 0..n, of the cardinal B-spline of order n supported on [0, n].
std::vector<double> bspline_integer_samples(int n) {
  std::vector<double> cur{1.0, 0.0};  // order 1, left-closed box
  for (int order = 2; order <= n; ++order) {
    std::vector<double> next(static_cast<std::size_t>(order + 1), 0.0);
    for (int q = 0; q <= order; ++q) {
      const double a = q < static_cast<int>(cur.size()) ? cur[static_cast<std::size_t>(q)] : 0.0;
      const double b = q >= 1 && q - 1 < static_cast<int>(cur.size()) ? cur[static_cast<std::size_t>(q - 1)] : 0.0;
      next[static_cast<std::size_t>(q)] = (q * a + (order - q) * b) / (order - 1);
    }
    cur = std::move(next);
  }
  return cur;
}

// DTFT of the integer samples of M_n at theta = 2 pi f / P, by Poisson
// summation over aliases. Uses 1 - e^{-i t} = e^{-i t/2} 2i sin(t/2) so that
// small frequencies keep full relative precision, and reduces the phase
// e^{-i n t/2} exactly in integer arithmetic.
std::complex<double> bspline_dtft(int n, std::size_t f, std::size_t P) {
  if (f == 0) return {1.0, 0.0};
  const double theta = kTwoPi * static_cast<double>(f) / static_cast<double>(P);
  const double chord = 2.0 * std::sin(0.5 * theta);
  double sum = 0.0;
  for (int l = -3; l <= 3; ++l) sum += std::pow(chord / (theta + kTwoPi * l), n);
  const auto turns = (static_cast<unsigned __int128>(n) * f) % (2 * static_cast<unsigned __int128>(P));
  const double phase = -kPi * static_cast<double>(turns) / static_cast<double>(P);
  return std::polar(sum, phase);
}

constexpr int kPoissonThreshold = 256;

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

double bessel_i(int order, double x) {
  check_order(order, x);
  if (x <= kSeriesLimit) return bessel_series(order, x);
  return std::exp(x) * bessel_asymptotic_scaled(order, x);
}

double bessel_i_scaled(int order, double x) {
  check_order(order, x);
  if (x <= kSeriesLimit) return std::exp(-x) * bessel_series(order, x);
  return bessel_asymptotic_scaled(order, x);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

MomentSet moments(double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("moments: kappa must be >= 0");
  MomentSet ms;
  ms.kappa = kappa;
  const double i0s = bessel_i_scaled(0, kappa);
  ms.log_m = std::log(kTwoPi) + kappa + std::log(i0s);
  ms.m = std::exp(ms.log_m);
  // g(y) = exp(kappa (cos 2 pi y - 1)) / (e^{-kappa} I_0(kappa)); integrate the even half.
  auto g = [&](double y) { return std::exp(kappa * (std::cos(kTwoPi * y) - 1.0)) / i0s; };
  constexpr double kTol = 1e-12;
  // Splitting at the bulk width keeps the recursion from missing a narrow peak.
  const double width = std::min(0.5, 8.0 / (kTwoPi * std::sqrt(std::max(kappa, 1.0))));
  auto half = [&](auto&& w) {
    double total = integrate_adaptive([&](double y) { return w(y) * g(y); }, 0.0, width, 0.25 * kTol);
    if (width < 0.5) total += integrate_adaptive([&](double y) { return w(y) * g(y); }, width, 0.5, 0.25 * kTol);
    return 2.0 * total;
  };
  ms.s2 = half([](double y) { return y * y; });
  ms.beta3 = half([](double y) { return y * y * y; });
  return ms;
}

double GridDensity::at_index(std::int64_t offset) const {
  const auto n = static_cast<std::int64_t>(values.size());
  std::int64_t i = (origin + offset) % n;
  if (i < 0) i += n;
  return values[static_cast<std::size_t>(i)];
}

double GridDensity::at_integer(int k) const {
  const double cells = k / step;
  const auto offset = static_cast<std::int64_t>(std::llround(cells));
  return at_index(offset);
}

GridDensity convolution_power_grid(double kappa, int n, double half_width, int log2_cells) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("convolution_power_grid: kappa must be >= 0");
  if (n < 1) throw std::invalid_argument("convolution_power_grid: n must be >= 1");
  if (log2_cells < 2 || log2_cells > 20) throw std::invalid_argument("convolution_power_grid: bad resolution");
  const double step = std::ldexp(1.0, -log2_cells);
  const std::int64_t half_cells = std::int64_t{1} << (log2_cells - 1);

  // Exact cell masses of g on [j step, (j+1) step], j = -half_cells .. half_cells - 1 (4-point Gauss).
  static constexpr double kNodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                       0.8611363115940526};
  static constexpr double kWeights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                         0.3478548451374538};
  std::vector<double> mass(static_cast<std::size_t>(2 * half_cells));
  for (std::int64_t j = -half_cells; j < half_cells; ++j) {
    const double mid = (static_cast<double>(j) + 0.5) * step;
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double y = mid + 0.5 * step * kNodes[q];
      acc += kWeights[q] * std::exp(kappa * (std::cos(kTwoPi * y) - 1.0));
    }
    mass[static_cast<std::size_t>(j + half_cells)] = acc;
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  for (double& m : mass) m /= total;

  const auto min_points = static_cast<std::size_t>(std::ceil(2.0 * half_width / step)) + static_cast<std::size_t>(n) +
                          static_cast<std::size_t>(2 * half_cells) + 2;
  const std::size_t P = next_pow2(min_points);

  RealFft cells(P);
  std::fill(cells.real, cells.real + P, 0.0);
  for (std::int64_t j = -half_cells; j < half_cells; ++j) {
    const auto idx = static_cast<std::size_t>((j % static_cast<std::int64_t>(P) + static_cast<std::int64_t>(P)) %
                                              static_cast<std::int64_t>(P));
    cells.real[idx] = mass[static_cast<std::size_t>(j + half_cells)];
  }
  fftw_execute(cells.forward);

  std::vector<std::complex<double>> kernel(P / 2 + 1);
  if (n <= kPoissonThreshold) {
    RealFft spline(P);
    std::fill(spline.real, spline.real + P, 0.0);
    const auto samples = bspline_integer_samples(n);
    for (std::size_t q = 0; q < samples.size(); ++q) spline.real[q] = samples[q];
    fftw_execute(spline.forward);
    for (std::size_t f = 0; f <= P / 2; ++f) kernel[f] = spline.bin(f);
  } else {
    for (std::size_t f = 0; f <= P / 2; ++f) kernel[f] = bspline_dtft(n, f, P);
  }

  for (std::size_t f = 0; f <= P / 2; ++f) cells.set_bin(f, int_pow(cells.bin(f), n) * kernel[f]);
  fftw_execute(cells.backward);

  GridDensity out;
  out.step = step;
  out.origin = static_cast<std::int64_t>(P / 2);
  out.values.resize(P);
  // c2r is unnormalized; divide by P and by the cell width to get a density.
  // Storage is rotated so that index origin holds y = 0.
  const double scale = 1.0 / (static_cast<double>(P) * step);
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t src = (i + P / 2) % P;
    out.values[i] = cells.real[src] * scale;
  }
  return out;
}

double WindingDistribution::probability(int k) const {
  if (k < -K || k > K) return 0.0;
  return probabilities[static_cast<std::size_t>(k + K)];
}

double WindingDistribution::mean() const {
  double m = 0.0;
  for (int k = -K; k <= K; ++k) m += k * probability(k);
  return m;
}

double WindingDistribution::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (int k = -K; k <= K; ++k) v += (k - mu) * (k - mu) * probability(k);
  return v;
}

int suggested_support(double kappa, int n) {
  const double s2 = moments(kappa).s2;
  const int k = static_cast<int>(std::ceil(8.0 * std::sqrt(s2 * n))) + 2;
  return std::max(k, 2);
}

namespace {

std::vector<double> integer_values(const GridDensity& g, int kmax) {
  std::vector<double> v(static_cast<std::size_t>(2 * kmax + 1));
  for (int k = -kmax; k <= kmax; ++k) v[static_cast<std::size_t>(k + kmax)] = g.at_integer(k);
  return v;
}

}  // namespace

WindingDistribution winding_distribution(double kappa, int n, int K) {
  if (K < 1) throw std::invalid_argument("winding_distribution: K must be >= 1");
  if (n < 1) throw std::invalid_argument("winding_distribution: n must be >= 1");
  const double pad = K + 1.0;
  const int wide = 2 * K + 3;

  // Richardson extrapolates from consecutive levels must agree to kRichardsonTol
  // (relative to the peak); the finest level is refined until they do.
  constexpr double kRichardsonTol = 1e-8;
  constexpr int kFirstLevel = 10;
  constexpr int kLastLevel = 13;
  auto level = [&](int lg) { return integer_values(convolution_power_grid(kappa, n, pad, lg), K); };
  auto extrapolate = [](const std::vector<double>& coarse, const std::vector<double>& fine) {
    std::vector<double> r(fine.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
    return r;
  };
  std::vector<double> prev = level(kFirstLevel - 1);
  std::vector<double> cur = level(kFirstLevel);
  std::vector<double> r_prev = extrapolate(prev, cur);
  int finest = kFirstLevel;
  std::vector<double> r_cur;
  double change = 0.0;
  for (int lg = kFirstLevel + 1;; ++lg) {
    std::vector<double> next = level(lg);
    r_cur = extrapolate(cur, next);
    const double peak = *std::max_element(r_cur.begin(), r_cur.end());
    change = 0.0;
    for (std::size_t i = 0; i < r_cur.size(); ++i) change = std::max(change, std::abs(r_cur[i] - r_prev[i]) / peak);
    finest = lg;
    cur = std::move(next);
    if (change < kRichardsonTol) break;
    if (lg == kLastLevel) {
      std::ostringstream m;
      m << "winding_distribution: grid refinement did not converge (change " << change << " at step 2^-" << lg << ")";
      throw std::runtime_error(m.str());
    }
    r_prev = r_cur;
  }

  // Same finest step with the pad doubled: measures aliasing and the tail beyond K.
  const auto fine = integer_values(convolution_power_grid(kappa, n, 2.0 * pad, finest), wide);

  WindingDistribution d;
  d.K = K;
  d.provenance = Provenance::kOracle;
  d.richardson_change = change;
  d.probabilities.resize(static_cast<std::size_t>(2 * K + 1));
  const double peak = *std::max_element(fine.begin(), fine.end());
  for (int k = -K; k <= K; ++k) {
    const auto i = static_cast<std::size_t>(k + K);
    d.alias_change = std::max(d.alias_change, std::abs(cur[i] - fine[static_cast<std::size_t>(k + wide)]) / peak);
    d.probabilities[i] = std::max(r_cur[i], 0.0);
  }
  // The law is even; average mirror entries to remove transform rounding.
  for (int k = 1; k <= K; ++k) {
    auto& a = d.probabilities[static_cast<std::size_t>(K + k)];
    auto& b = d.probabilities[static_cast<std::size_t>(K - k)];
    a = b = 0.5 * (a + b);
  }

  double inside = 0.0;
  for (int k = -K; k <= K; ++k) inside += std::max(fine[static_cast<std::size_t>(k + wide)], 0.0);
  double outside = 0.0;
  for (int k = K + 1; k <= wide; ++k) {
    outside += std::max(fine[static_cast<std::size_t>(k + wide)], 0.0) +
               std::max(fine[static_cast<std::size_t>(-k + wide)], 0.0);
  }
  d.tail_mass = outside / (inside + outside);
  if (d.tail_mass > 1e-9) {
    std::ostringstream m;
    m << "winding_distribution: mass beyond K=" << K << " is " << d.tail_mass << " (> 1e-9); increase K (suggested "
      << suggested_support(kappa, n) << ")";
    throw SupportTooSmall(m.str());
  }

  const double norm = std::accumulate(d.probabilities.begin(), d.probabilities.end(), 0.0);
  for (double& p : d.probabilities) p /= norm;
  return d;
}

GridShape grid_shape(const GridDensity& g) {
  const double peak = *std::max_element(g.values.begin(), g.values.end());
  GridShape s;
  s.peak = peak;
  s.peak_at_origin = g.values[static_cast<std::size_t>(g.origin)] == peak;
  const std::int64_t half = g.half_extent();
  double prev = g.at_index(0);
  for (std::int64_t i = 1; i < half; ++i) {
    const double right = g.at_index(i);
    const double left = g.at_index(-i);
    s.asymmetry = std::max(s.asymmetry, std::abs(right - left) / peak);
    s.max_rise = std::max(s.max_rise, std::max(right, left) - prev > 0.0 ? (std::max(right, left) - prev) / peak : 0.0);
    prev = std::min(right, left);
  }
  return s;
}

WindingDistribution winding_distribution(const ModelParams& p, int K) {
  p.validate();
  if (p.field_B != 0.0) throw std::invalid_argument("winding_distribution: oracle requires field_B == 0");
  return winding_distribution(p.kappa(), p.N, K);
}

WindingDistribution empirical_winding_distribution(const std::vector<int>& samples, int K) {
  if (samples.empty()) throw std::invalid_argument("empirical_winding_distribution: no samples");
  WindingDistribution d;
  d.K = K;
  d.provenance = Provenance::kEmpirical;
  d.probabilities.assign(static_cast<std::size_t>(2 * K + 1), 0.0);
  std::size_t outside = 0;
  for (int w : samples) {
    if (w < -K || w > K) ++outside;
    else d.probabilities[static_cast<std::size_t>(w + K)] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  for (double& p : d.probabilities) p /= n;
  d.tail_mass = static_cast<double>(outside) / n;
  return d;
}

double clt_check_scale(const ModelParams& p) {
  p.validate();
  return kTwoPi * std::sqrt(p.J / (2.0 * p.sigma * p.sigma * p.N));
}

TimescalePrediction timescale(const ModelParams& p, double epsilon) {
  p.validate();
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("timescale: need 0 <= epsilon < 1");
  const double ratio = p.coupling_ratio();
  const double log_n = std::log(static_cast<double>(p.N));
  TimescalePrediction t;
  t.log_center = ratio - log_n;
  t.log_lower = ratio * (1.0 - epsilon) - log_n;
  t.log_upper = ratio * (1.0 + epsilon) - log_n;
  t.t_center = std::exp(t.log_center);
  t.t_lower = std::exp(t.log_lower);
  t.t_upper = std::exp(t.log_upper);
  return t;
}

}  // namespace xychain::theory
