#include "clade/spline.hpp"

#include <cmath>

#include "clade/error.hpp"

namespace clade {

NaturalSplineSolver::NaturalSplineSolver(std::size_t n) : n_(n) {
  if (n < 3) return;
  // Interior system m[i-1] + 4 m[i] + m[i+1] = r[i], i = 1..n-2, m[0] = m[n-1] = 0.
  const std::size_t k = n - 2;
  c_prime_.resize(k);
  denom_.resize(k);
  double prev_c = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = 4.0 - (i == 0 ? 0.0 : prev_c);
    denom_[i] = d;
    c_prime_[i] = 1.0 / d;
    prev_c = c_prime_[i];
  }
}

void NaturalSplineSolver::solve(std::span<const double> y, std::span<double> m) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i) m[i] = 0.0;
  if (n < 3) return;
  const std::size_t k = n - 2;
  // Forward sweep into m[1..n-2] as scratch.
  double prev = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
    prev = (r - (i == 0 ? 0.0 : prev)) / denom_[i];
    m[i + 1] = prev;
  }
  for (std::size_t i = k - 1; i-- > 0;) m[i + 1] -= c_prime_[i] * m[i + 2];
}

double eval_natural_spline(std::span<const double> y, std::span<const double> m, double x) {
  const std::size_t n = y.size();
  if (n == 1) return y[0];
  const double last = static_cast<double>(n - 1);
  if (x <= 0.0) {
    const double slope = y[1] - y[0] - (2.0 * m[0] + m[1]) / 6.0;
    return y[0] + x * slope;
  }
  if (x >= last) {
    const double slope = y[n - 1] - y[n - 2] + (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
    return y[n - 1] + (x - last) * slope;
  }
  std::size_t i = static_cast<std::size_t>(std::floor(x));
  if (i >= n - 1) i = n - 2;
  const double t = x - static_cast<double>(i);
  const double u = 1.0 - t;
  return u * y[i] + t * y[i + 1] + ((u * u * u - u) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0;
}

NaturalSpline::NaturalSpline(std::span<const double> samples) : y_(samples.begin(), samples.end()) {
  if (y_.empty()) throw ContractError("NaturalSpline: no samples");
  m_.assign(y_.size(), 0.0);
  if (y_.size() < 4) {
    linear_ = true;
    return;
  }
  NaturalSplineSolver(y_.size()).solve(y_, m_);
}

double NaturalSpline::operator()(double x) const { return eval_natural_spline(y_, m_, x); }

}  // namespace clade
