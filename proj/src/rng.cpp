#include "xychain/rng.hpp"

#include <cmath>
#include <numbers>

namespace xychain::rng {

namespace {

constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) noexcept {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

Philox4x64::Counter Philox4x64::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void box_muller(std::uint64_t a, std::uint64_t b, double& z0, double& z1) noexcept {
  const double r = std::sqrt(-2.0 * std::log(to_unit_open(a)));
  const double phase = 2.0 * std::numbers::pi * to_unit(b);
  z0 = r * std::cos(phase);
  z1 = r * std::sin(phase);
}

Stream::Stream(std::uint64_t seed, std::uint64_t stream_id, Domain domain) noexcept
    : key_{seed, stream_id}, domain_(static_cast<std::uint64_t>(domain)) {}

std::uint64_t Stream::next_u64() noexcept {
  if (used_ == 4) {
    buffer_ = Philox4x64::generate({block_, 0, domain_, 0}, key_);
    ++block_;
    used_ = 0;
  }
  return buffer_[static_cast<std::size_t>(used_++)];
}

double Stream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const std::uint64_t a = next_u64();
  const std::uint64_t b = next_u64();
  double z0, z1;
  box_muller(a, b, z0, z1);
  spare_normal_ = z1;
  has_spare_ = true;
  return z0;
}

void step_normals(std::uint64_t seed, std::uint64_t replica, std::uint64_t step, std::span<double> out) noexcept {
  const Philox4x64::Key key{seed, replica};
  const auto domain = static_cast<std::uint64_t>(Domain::kDynamicsNoise);
  const std::size_t n = out.size();
  std::size_t i = 0;
  for (std::uint64_t block = 0; i < n; ++block) {
    const auto w = Philox4x64::generate({block, step, domain, 0}, key);
    double z[4];
    box_muller(w[0], w[1], z[0], z[1]);
    box_muller(w[2], w[3], z[2], z[3]);
    for (int j = 0; j < 4 && i < n; ++j) out[i++] = z[j];
  }
}

}  // namespace xychain::rng
