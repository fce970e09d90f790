#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clade {

// Natural cubic spline through samples at integer positions 0..n-1.
// Outside [0, n-1] it continues linearly with the end slope, which is what
// a zero end curvature implies. With fewer than 4 samples it degrades to
// piecewise-linear interpolation.
class NaturalSpline {
 public:
  explicit NaturalSpline(std::span<const double> samples);
  double operator()(double x) const;
  bool linear_fallback() const { return linear_; }
  const std::vector<double>& second_derivatives() const { return m_; }

 private:
  std::vector<double> y_;
  std::vector<double> m_;
  bool linear_ = false;
};

// Shared tridiagonal factorisation for many splines of the same length:
// resampling a volume solves one system per line, all with the same matrix.
class NaturalSplineSolver {
 public:
  explicit NaturalSplineSolver(std::size_t n);
  // Second derivatives for `samples` (size n).
  void solve(std::span<const double> samples, std::span<double> m) const;
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> c_prime_;  // forward-sweep coefficients
  std::vector<double> denom_;
};

double eval_natural_spline(std::span<const double> y, std::span<const double> m, double x);

}  // namespace clade
