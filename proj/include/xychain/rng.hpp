#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream id, domain tag, counter), so replicas can run in any order
// on any thread and still reproduce bit-identically.

#include <array>
#include <cstdint>
#include <span>

namespace xychain::rng {

/// Philox4x64-10 block function (Salmon et al. 2011).
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;
  static Counter generate(Counter ctr, Key key) noexcept;
};

/// Domain tags keep the streams of different consumers disjoint.
enum class Domain : std::uint64_t {
  kDynamicsNoise = 1,
  kMcmc = 2,
  kBridge = 3,
  kInitial = 4,
  kAuxiliary = 5,
};

/// Uniform on [0, 1) with 53 random bits.
inline double to_unit(std::uint64_t u) noexcept { return static_cast<double>(u >> 11) * 0x1.0p-53; }
/// Uniform on (0, 1) with 52 random bits; 53 would round the top value to 1.
inline double to_unit_open(std::uint64_t u) noexcept {
  return (static_cast<double>(u >> 12) + 0.5) * 0x1.0p-52;
}

/// Sequential stream owned by one sampler. Not thread-safe; copy to fork.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id, Domain domain = Domain::kAuxiliary) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept { return to_unit(next_u64()); }
  double uniform_open() noexcept { return to_unit_open(next_u64()); }
  /// Uniform on [a, b).
  double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }
  double normal() noexcept;

  [[nodiscard]] std::uint64_t blocks_used() const noexcept { return block_; }

 private:
  Philox4x64::Key key_;
  std::uint64_t domain_;
  std::uint64_t block_ = 0;
  Philox4x64::Counter buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Fills out with i.i.d. standard normals for one integration step; the
/// values depend only on (seed, replica, step).
void step_normals(std::uint64_t seed, std::uint64_t replica, std::uint64_t step, std::span<double> out) noexcept;

/// Box-Muller transform of two raw words.
void box_muller(std::uint64_t a, std::uint64_t b, double& z0, double& z1) noexcept;

}  // namespace xychain::rng
