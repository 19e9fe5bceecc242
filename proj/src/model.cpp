#include "xychain/model.hpp"

#include <algorithm>
#include <sstream>

namespace xychain {

double wrap(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("wrap: non-finite angle");
  return wrap_fast(theta);
}

void ModelParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("ModelParams: " + what); };
  if (N < 3) fail("N must be >= 3");
  if (!(J >= 0.0) || !std::isfinite(J)) fail("J must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma must be > 0");
  if (!(field_B >= 0.0) || !std::isfinite(field_B)) fail("field_B must be >= 0");
}

ChainState::ChainState(std::vector<double> angles) : angles_(std::move(angles)) {
  if (angles_.size() < 3) throw std::invalid_argument("ChainState: need at least 3 rotors");
  for (double& a : angles_) a = wrap(a);
}

ChainState ChainState::constant(int n, double c) {
  return ChainState(std::vector<double>(static_cast<std::size_t>(std::max(n, 0)), c));
}

ChainState ChainState::phase_minimizer(int n, int k, double offset) {
  std::vector<double> v(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = kTwoPi * k * (i + 1) / n + offset;
  return ChainState(std::move(v));
}

double ChainState::at(int i) const noexcept {
  const int n = size();
  int j = i % n;
  if (j < 0) j += n;
  return angles_[static_cast<std::size_t>(j)];
}

double hamiltonian(const ChainState& x, const ModelParams& p) {
  const auto a = x.angles();
  const std::size_t n = a.size();
  double bonds = 0.0;
  double field = 0.0;
  double prev = a[n - 1];
  for (std::size_t i = 0; i < n; ++i) {
    bonds += std::cos(a[i] - prev);
    field += std::cos(a[i]);
    prev = a[i];
  }
  return -p.J * bonds - p.field_B * field;
}

void grad_hamiltonian(std::span<const double> x, const ModelParams& p, std::span<double> out) {
  const std::size_t n = x.size();
  // s = sin(x_i - x_{i-1}) for bond (i-1, i); component i gets s_i - s_{i+1}.
  const double s_first = std::sin(x[0] - x[n - 1]);
  double s_prev = s_first;
  for (std::size_t i = 0; i < n; ++i) {
    const double s_next = (i + 1 < n) ? std::sin(x[i + 1] - x[i]) : s_first;
    out[i] = p.J * (s_prev - s_next);
    if (p.field_B != 0.0) out[i] += p.field_B * std::sin(x[i]);
    s_prev = s_next;
  }
}

std::vector<double> grad_hamiltonian(const ChainState& x, const ModelParams& p) {
  std::vector<double> g(x.angles().size());
  grad_hamiltonian(x.angles(), p, g);
  return g;
}

WindingNumber winding_number(std::span<const double> x) {
  const std::size_t n = x.size();
  double sum = 0.0;
  double prev = x[n - 1];
  for (std::size_t i = 0; i < n; ++i) {
    const double b = wrap_fast(x[i] - prev);
    if (std::abs(b) >= kPi - kTolPi) return WindingNumber::ill_defined();
    sum += b;
    prev = x[i];
  }
  const double turns = sum / kTwoPi;
  const double rounded = std::nearbyint(turns);
  if (std::abs(turns - rounded) > 1e-9 * static_cast<double>(n)) {
    std::ostringstream msg;
    msg << "winding_number: bond sum " << sum << " is not a multiple of 2 pi";
    throw std::logic_error(msg.str());
  }
  return WindingNumber(static_cast<int>(rounded));
}

WindingNumber winding_number(const ChainState& x) { return winding_number(x.angles()); }

int good_interval_count(std::span<const double> x, int r, double delta) {
  const int n = static_cast<int>(x.size());
  if (r < 1 || r > n) throw std::invalid_argument("good_interval_count: need 1 <= r <= N");
  if (!(delta > 0.0)) throw std::invalid_argument("good_interval_count: delta must be > 0");
  const double limit = 3.0 * delta;
  // One-based site i maps to x[(i - 1) mod N].
  auto site = [&](int i) { return x[static_cast<std::size_t>(((i - 1) % n + n) % n)]; };
  int good = 0;
  for (int j = 1; j <= n / r; ++j) {
    bool ok = true;
    for (int i = r * j; i < r * j + r && ok; ++i) ok = std::abs(wrap_fast(site(i + 1) - site(i))) <= limit;
    good += ok ? 1 : 0;
  }
  return good;
}

int good_interval_count(const ChainState& x, int r, double delta) {
  return good_interval_count(x.angles(), r, delta);
}

bool in_bad_event(std::span<const double> x, int r, double delta) {
  const int n = static_cast<int>(x.size());
  return good_interval_count(x, r, delta) < n / (2 * r);
}

double magnetization(std::span<const double> x) {
  double m = 0.0;
  for (double a : x) m += std::cos(a);
  return m / static_cast<double>(x.size());
}

double mid_chain_correlation(std::span<const double> x) {
  const std::size_t half = x.size() / 2;
  return std::cos(x[0] - x[half - 1]);
}

}  // namespace xychain
