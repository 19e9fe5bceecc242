#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "xychain/rng.hpp"

using namespace xychain::rng;

TEST_CASE("Philox4x64-10 known answers") {
  using C = Philox4x64::Counter;
  using K = Philox4x64::Key;
  CHECK(Philox4x64::generate(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x16554d9eca36314cull, 0xdb20fe9d672d0fdcull, 0xd7e772cee186176bull, 0x7e68b68aec7ba23bull});
  CHECK(Philox4x64::generate(C{~0ull, ~0ull, ~0ull, ~0ull}, K{~0ull, ~0ull}) ==
        C{0x87b092c3013fe90bull, 0x438c3c67be8d0224ull, 0x9cc7d7c69cd777b6ull, 0xa09caebf594f0ba0ull});
  CHECK(Philox4x64::generate(C{0x243f6a8885a308d3ull, 0x13198a2e03707344ull, 0xa4093822299f31d0ull,
                               0x082efa98ec4e6c89ull},
                             K{0x452821e638d01377ull, 0xbe5466cf34e90c6cull}) ==
        C{0xa528f45403e61d95ull, 0x38c72dbd566e9788ull, 0xa5a1610e72fd18b5ull, 0x57bd43b5e52b7fe6ull});
}

TEST_CASE("unit conversions") {
  CHECK(to_unit(0) == 0.0);
  CHECK(to_unit(~0ull) < 1.0);
  CHECK(to_unit_open(0) > 0.0);
  CHECK(to_unit_open(~0ull) < 1.0);
}

TEST_CASE("streams are reproducible and disjoint") {
  Stream a(42, 3, Domain::kMcmc);
  Stream b(42, 3, Domain::kMcmc);
  Stream c(42, 4, Domain::kMcmc);
  Stream d(42, 3, Domain::kBridge);
  Stream e(43, 3, Domain::kMcmc);
  int same_c = 0, same_d = 0, same_e = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    same_c += x == c.next_u64();
    same_d += x == d.next_u64();
    same_e += x == e.next_u64();
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
  CHECK(same_e == 0);

  // Copying forks the stream state.
  Stream f = a;
  CHECK(f.next_u64() == a.next_u64());
}

TEST_CASE("uniform and normal moments") {
  Stream s(1, 0);
  const int n = 200000;
  double su = 0, su2 = 0, sz = 0, sz2 = 0, sz4 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    su2 += u * u;
    const double z = s.normal();
    sz += z;
    sz2 += z * z;
    sz4 += z * z * z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(su2 / n - 1.0 / 3) < 0.005);
  CHECK(std::abs(sz / n) < 4 / std::sqrt(double(n)));
  CHECK(std::abs(sz2 / n - 1.0) < 4 * std::sqrt(2.0 / n));
  CHECK(std::abs(sz4 / n - 3.0) < 0.1);
}

TEST_CASE("step normals depend only on (seed, replica, step)") {
  std::vector<double> a(13), b(13), c(13), d(13);
  step_normals(9, 2, 100, a);
  step_normals(9, 2, 99, c);
  step_normals(9, 2, 100, b);
  step_normals(9, 3, 100, d);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
  for (double v : a) CHECK(std::isfinite(v));
}

TEST_CASE("box muller produces finite pairs") {
  double z0 = 0, z1 = 0;
  box_muller(0, 0, z0, z1);
  CHECK(std::isfinite(z0));
  CHECK(std::isfinite(z1));
  box_muller(~0ull, ~0ull, z0, z1);
  CHECK(std::isfinite(z0));
  CHECK(std::isfinite(z1));
}
