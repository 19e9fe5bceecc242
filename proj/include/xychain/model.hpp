#pragma once

// Periodic XY rotor chain: configurations, energy, and the winding functional.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xychain {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Bonds within this distance of pi make the winding number ill-defined.
inline constexpr double kTolPi = 1e-12;

/// Representative of theta in (-pi, pi]. Throws std::invalid_argument on
/// non-finite input.
double wrap(double theta);

/// Unchecked variant for hot loops; theta must be finite.
inline double wrap_fast(double theta) noexcept {
  if (theta > -kPi && theta <= kPi) return theta;
  if (theta > -3.0 * kPi && theta <= 3.0 * kPi) {
    const double r = theta > kPi ? theta - kTwoPi : theta + kTwoPi;
    if (r > -kPi && r <= kPi) return r;
  }
  double r = std::remainder(theta, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

/// An angle held in its canonical representative (-pi, pi].
class Angle {
 public:
  constexpr Angle() = default;
  explicit Angle(double theta) : value_(wrap(theta)) {}

  [[nodiscard]] constexpr double value() const noexcept { return value_; }
  Angle& operator+=(double d) {
    value_ = wrap(value_ + d);
    return *this;
  }
  friend Angle operator+(Angle a, double d) { return a += d; }
  friend bool operator==(Angle, Angle) = default;

 private:
  double value_ = 0.0;
};

struct ModelParams {
  int N = 3;
  double J = 1.0;
  double sigma = 1.0;
  double field_B = 0.0;

  /// von Mises concentration of a bond increment, J / (2 sigma^2).
  [[nodiscard]] double kappa() const noexcept { return J / (2.0 * sigma * sigma); }
  /// Inverse "temperature" of the Gibbs weight exp(-H / (2 sigma^2)).
  [[nodiscard]] double gibbs_beta() const noexcept { return 1.0 / (2.0 * sigma * sigma); }
  /// J / sigma^2, the exponent governing the metastable time scale.
  [[nodiscard]] double coupling_ratio() const noexcept { return J / (sigma * sigma); }

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// N rotor angles, index 0..N-1 (index 0 plays the role of x_1), periodic.
/// Every stored angle lies in (-pi, pi].
class ChainState {
 public:
  ChainState() = default;
  /// Wraps every entry; throws if size < 3 or any entry is non-finite.
  explicit ChainState(std::vector<double> angles);

  static ChainState constant(int n, double c = 0.0);
  /// x_i = 2 pi k i / N + offset for i = 1..N (the phase-k energy minimizer).
  static ChainState phase_minimizer(int n, int k, double offset = 0.0);

  [[nodiscard]] int size() const noexcept { return static_cast<int>(angles_.size()); }
  [[nodiscard]] double operator[](int i) const noexcept { return angles_[static_cast<std::size_t>(i)]; }
  /// Periodic access: at(-1) is the last entry.
  [[nodiscard]] double at(int i) const noexcept;
  void set(int i, double theta) { angles_.at(static_cast<std::size_t>(i)) = wrap(theta); }

  [[nodiscard]] std::span<const double> angles() const noexcept { return angles_; }

  /// Direct access for integrators; callers must keep entries wrapped.
  [[nodiscard]] std::vector<double>& raw() noexcept { return angles_; }

  friend bool operator==(const ChainState&, const ChainState&) = default;

 private:
  std::vector<double> angles_;
};

/// Integer winding number, or ill-defined when some bond sits at pi.
class WindingNumber {
 public:
  constexpr WindingNumber() = default;
  constexpr explicit WindingNumber(int v) : value_(v) {}
  static constexpr WindingNumber ill_defined() { return WindingNumber{}; }

  [[nodiscard]] constexpr bool defined() const noexcept { return value_.has_value(); }
  [[nodiscard]] int value() const {
    if (!value_) throw std::logic_error("winding number is ill-defined");
    return *value_;
  }
  [[nodiscard]] constexpr bool is(int k) const noexcept { return value_ && *value_ == k; }
  [[nodiscard]] std::string to_string() const { return value_ ? std::to_string(*value_) : "ill_defined"; }

  friend constexpr bool operator==(WindingNumber, WindingNumber) = default;

 private:
  std::optional<int> value_;
};

double hamiltonian(const ChainState& x, const ModelParams& p);
std::vector<double> grad_hamiltonian(const ChainState& x, const ModelParams& p);
/// Writes the gradient into out (size N) without allocating.
void grad_hamiltonian(std::span<const double> x, const ModelParams& p, std::span<double> out);

WindingNumber winding_number(const ChainState& x);
WindingNumber winding_number(std::span<const double> x);

/// Number of good blocks |G_x|: blocks j = 1..floor(N/r) whose bonds
/// (x_i, x_{i+1}), i = r j .. r j + r - 1 (periodic), all satisfy
/// |wrap(x_{i+1} - x_i)| <= 3 delta.
int good_interval_count(const ChainState& x, int r, double delta);
int good_interval_count(std::span<const double> x, int r, double delta);
/// Membership in the bad event E: fewer than floor(N / (2r)) good blocks.
bool in_bad_event(std::span<const double> x, int r, double delta);

/// (1/N) sum_i cos(x_i).
double magnetization(std::span<const double> x);
/// cos(x_1 - x_{floor(N/2)}) with one-based indices.
double mid_chain_correlation(std::span<const double> x);

}  // namespace xychain
