#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xychain/equilibrium.hpp"
#include "xychain/rng.hpp"
#include "xychain/stats.hpp"
#include "xychain/theory.hpp"

using namespace xychain;
using namespace xychain::theory;

TEST_CASE("bessel functions") {
  CHECK(bessel_i(0, 0.0) == 1.0);
  CHECK(bessel_i(1, 0.0) == 0.0);
  CHECK(bessel_i(0, 1.0) == doctest::Approx(1.2660658777520082).epsilon(1e-14));
  CHECK(bessel_i(1, 1.0) == doctest::Approx(0.5651591039924851).epsilon(1e-14));
  CHECK(bessel_i(0, 15.0) == doctest::Approx(339649.3732979138).epsilon(1e-12));
  CHECK(bessel_i(0, 20.0) == doctest::Approx(43558282.559553534).epsilon(1e-12));
  CHECK(bessel_i(1, 30.0) == doctest::Approx(768532038938.9569).epsilon(1e-12));
  CHECK(bessel_i(0, 100.0) == doctest::Approx(1.0737517071310738e42).epsilon(1e-12));
  CHECK(bessel_i_scaled(0, 1000.0) == doctest::Approx(bessel_i_scaled(0, 999.0)).epsilon(1e-3));
  CHECK(std::isfinite(bessel_i_scaled(1, 1e6)));
  CHECK_THROWS_AS(bessel_i(0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(bessel_i(2, 1.0), std::invalid_argument);

  // Continuity across the series / asymptotic switch.
  for (double x : {19.999, 20.0, 20.001}) {
    CHECK(bessel_i_scaled(0, x) == doctest::Approx(bessel_i_scaled(0, 20.0)).epsilon(1e-4));
  }
}

TEST_CASE("adaptive quadrature") {
  CHECK(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, kPi, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-11));
  CHECK(integrate_adaptive([](double x) { return x * x; }, -1.0, 2.0, 1e-12) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("moments") {
  const auto z = moments(0.0);
  CHECK(z.m == doctest::Approx(kTwoPi).epsilon(1e-14));
  CHECK(z.s2 == doctest::Approx(1.0 / 12.0).epsilon(1e-11));
  CHECK(z.beta3 == doctest::Approx(1.0 / 32.0).epsilon(1e-11));

  for (double kappa : {0.3, 1.0, 3.0, 10.0, 50.0, 200.0}) {
    const auto m = moments(kappa);
    CHECK(m.m == doctest::Approx(kTwoPi * bessel_i(0, kappa)).epsilon(1e-10));
    CHECK(m.s2 > 0.0);
    CHECK(m.beta3 >= std::pow(m.s2, 1.5));
  }

  const auto m50 = moments(50.0);
  CHECK(std::abs(m50.m / (2.0 * std::sqrt(kPi) * std::exp(50.0) * std::sqrt(1.0 / 100.0)) - 1.0) < 0.02);
  CHECK(std::abs(m50.s2 / (2.0 / (kTwoPi * kTwoPi) * (1.0 / 100.0)) - 1.0) < 0.05);

  // Direct quadrature of y^2 g(y) over the full interval.
  const double kappa = 3.0;
  const double m = moments(kappa).m;
  const double direct = integrate_adaptive(
      [&](double y) { return y * y * kTwoPi * std::exp(kappa * std::cos(kTwoPi * y)) / m; }, -0.5, 0.5, 1e-14);
  CHECK(moments(kappa).s2 == doctest::Approx(direct).epsilon(1e-10));
  CHECK_THROWS_AS(moments(-1.0), std::invalid_argument);
}

TEST_CASE("moment asymptotics at kappa = 200") {
  const double kappa = 200.0;
  const auto m = moments(kappa);
  const double ratio = 1.0 / (2.0 * kappa);  // sigma^2 / J
  CHECK(std::abs(m.m / (2.0 * std::sqrt(kPi) * std::exp(kappa) * std::sqrt(ratio)) - 1.0) < 0.01);
  CHECK(std::abs(m.s2 / (2.0 / (kTwoPi * kTwoPi) * ratio) - 1.0) < 0.02);
}

TEST_CASE("winding law: frozen values") {
  // Reference values from an independent double-precision evaluation.
  const auto a = winding_distribution(1.0, 8, suggested_support(1.0, 8));
  CHECK(a.probability(0) == doctest::Approx(0.696232065576737).epsilon(1e-11));
  CHECK(a.probability(1) == doctest::Approx(0.150505461649353).epsilon(1e-11));
  const auto b = winding_distribution(3.0, 64, suggested_support(3.0, 64));
  CHECK(b.probability(0) == doctest::Approx(0.475105177059497).epsilon(1e-11));
  CHECK(b.probability(1) == doctest::Approx(0.233436691588482).epsilon(1e-11));
  const auto c = winding_distribution(3.0, 16, suggested_support(3.0, 16));
  CHECK(c.probability(0) == doctest::Approx(0.894445178067745).epsilon(1e-11));
  const auto d = winding_distribution(0.5, 5, suggested_support(0.5, 5));
  CHECK(d.probability(0) == doctest::Approx(0.716565630733765).epsilon(1e-11));
}

TEST_CASE("winding law: two free rotors") {
  const auto d = winding_distribution(0.0, 2, 3);
  CHECK(d.probability(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(d.probability(1)) < 1e-12);
  CHECK(std::abs(d.probability(-1)) < 1e-12);
  CHECK(d.provenance == Provenance::kOracle);
}

TEST_CASE("winding law: invariants and diagnostics") {
  for (auto [kappa, n] : {std::pair{3.0, 64}, std::pair{1.0, 8}, std::pair{4.0, 1024}, std::pair{0.0, 7}}) {
    const int K = suggested_support(kappa, n);
    const auto d = winding_distribution(kappa, n, K);
    REQUIRE(d.probabilities.size() == static_cast<std::size_t>(2 * K + 1));
    double total = 0.0;
    for (int k = -K; k <= K; ++k) {
      CHECK(d.probability(k) >= 0.0);
      CHECK(d.probability(k) == d.probability(-k));
      total += d.probability(k);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (int k = 0; k < K; ++k) CHECK(d.probability(k) + 1e-14 >= d.probability(k + 1));
    CHECK(d.tail_mass <= 1e-9);
    CHECK(d.alias_change < 1e-10);
    CHECK(d.richardson_change < 1e-8);
  }
  CHECK_THROWS_AS(winding_distribution(3.0, 1024, 3), SupportTooSmall);
  CHECK_THROWS_AS(winding_distribution(3.0, 64, 0), std::invalid_argument);
  CHECK_THROWS_AS(winding_distribution(ModelParams{8, 1.0, 1.0, 0.5}, 3), std::invalid_argument);
}

TEST_CASE("winding law of N=64, kappa=3 against the exact bridge sampler") {
  const double kappa = 3.0;
  const int n = 64;
  rng::Stream s(13, 0, rng::Domain::kBridge);
  const int kmax = 4;
  std::vector<double> counts(2 * kmax + 1, 0.0), probs(2 * kmax + 1, 0.0);
  for (int i = 0; i < 100000; ++i) {
    const int w = sample_bridge(kappa, n, s).winding;
    counts[static_cast<std::size_t>(std::clamp(w, -kmax, kmax) + kmax)] += 1.0;
  }
  const auto d = winding_distribution(kappa, n, suggested_support(kappa, n));
  for (int k = -d.K; k <= d.K; ++k) probs[static_cast<std::size_t>(std::clamp(k, -kmax, kmax) + kmax)] += d.probability(k);
  CHECK(stats::chi_square_gof(counts, probs).p_value > 0.01);
}

TEST_CASE("grid density is even and unimodal") {
  for (int n : {2, 16, 256}) {
    for (double kappa : {0.0, 1.0, 10.0}) {
      const auto g = convolution_power_grid(kappa, n, 4.0, 10);
      const auto shape = grid_shape(g);
      CHECK(shape.peak_at_origin);
      CHECK(shape.asymmetry < 1e-12);
      CHECK(shape.max_rise < 1e-12);
    }
  }
  // Total mass of the density is one.
  const auto g = convolution_power_grid(1.0, 16, 8.0, 10);
  double mass = 0.0;
  for (double v : g.values) mass += v * g.step;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("frozen regime: N=8, kappa=80") {
  const auto d = winding_distribution(80.0, 8, 3);
  CHECK(d.probability(0) >= 0.99);
}

TEST_CASE("local limit estimate at N=1024, kappa=4") {
  const double kappa = 4.0;
  const int n = 1024;
  const auto d = winding_distribution(kappa, n, suggested_support(kappa, n));
  const double s = std::sqrt(moments(kappa).s2);
  const double sd = s * std::sqrt(static_cast<double>(n));
  double c_fit = 0.0;
  for (int k = -3; k <= 3; ++k) {
    const double phi = std::exp(-0.5 * (k / sd) * (k / sd)) / std::sqrt(kTwoPi) / sd;
    c_fit = std::max(c_fit, std::abs(d.probability(k) - phi) * s * n);
  }
  MESSAGE("fitted local-limit constant C = " << c_fit);
  CHECK(std::isfinite(c_fit));
  CHECK(c_fit > 0.0);
}

TEST_CASE("empirical winding law") {
  const std::vector<int> w{0, 0, 1, -1, 5};
  const auto d = empirical_winding_distribution(w, 2);
  CHECK(d.provenance == Provenance::kEmpirical);
  CHECK(d.probability(0) == doctest::Approx(0.4));
  CHECK(d.probability(1) == doctest::Approx(0.2));
  CHECK(d.tail_mass == doctest::Approx(0.2));
  CHECK_THROWS_AS(empirical_winding_distribution({}, 2), std::invalid_argument);
}

TEST_CASE("clt scale") {
  CHECK(clt_check_scale(ModelParams{4, 2.0, 1.0, 0.0}) == doctest::Approx(kTwoPi * std::sqrt(1.0 / 4.0)));
  // J = 2 sigma^2 and N = 4 pi^2 (continuous N) gives 1.
  CHECK(kTwoPi * std::sqrt(1.0 / (4.0 * kPi * kPi)) == doctest::Approx(1.0));
  CHECK(clt_check_scale(ModelParams{100, 20.0, 3.0, 0.0}) == doctest::Approx(0.6623).epsilon(1e-4));
}

TEST_CASE("timescales") {
  const auto a = timescale(ModelParams{20, 20.0, 3.0, 0.0}, 0.0);
  CHECK(a.t_center == doctest::Approx(std::exp(20.0 / 9.0) / 20.0));
  CHECK(a.t_center == doctest::Approx(0.4613).epsilon(1e-3));
  const auto b = timescale(ModelParams{100, 20.0, 3.0, 0.0}, 0.0);
  CHECK(b.t_center == doctest::Approx(std::exp(20.0 / 9.0) / 100.0).epsilon(1e-14));
  CHECK(b.t_center == doctest::Approx(0.0922781435).epsilon(1e-9));
  CHECK(timescale(ModelParams{200, 20.0, 3.0, 0.0}, 0.0).t_center == doctest::Approx(0.5 * b.t_center).epsilon(1e-14));

  const auto c = timescale(ModelParams{20, 20.0, 3.0, 0.0}, 0.5);
  CHECK(c.t_lower < c.t_center);
  CHECK(c.t_center < c.t_upper);
  CHECK(c.log_upper == doctest::Approx(20.0 / 9.0 * 1.5 - std::log(20.0)));

  // Huge exponents stay finite in log space.
  const auto big = timescale(ModelParams{10, 1e4, 1.0, 0.0}, 0.5);
  CHECK(big.log_center == doctest::Approx(1e4 - std::log(10.0)));
  CHECK_THROWS_AS(timescale(ModelParams{10, 1.0, 1.0, 0.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(timescale(ModelParams{10, 1.0, 1.0, 0.0}, -0.1), std::invalid_argument);
}
