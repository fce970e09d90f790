#pragma once
// Helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <unordered_set>
#include <vector>

#include "clade/ops.hpp"
#include "clade/volume.hpp"

namespace testing {

template <typename T = double>
clade::Array<T> random_array(const clade::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  clade::Array<T> a(shape);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<T>(u(rng));
  return a;
}

inline clade::Image random_image(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  clade::Image im(rows, cols);
  for (double& v : im.data) v = u(rng);
  return im;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Direct quadruple loop cross-correlation with zero padding; no im2col.
inline clade::Array<double> conv2d_oracle(const clade::Array<double>& x, const clade::Array<double>& w,
                                          std::size_t stride, std::size_t pad) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), K = w.dim(2);
  const std::size_t Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  clade::Array<double> y({B, O, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < Ho; ++i)
        for (std::size_t j = 0; j < Wo; ++j) {
          double acc = 0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < K; ++p)
              for (std::size_t q = 0; q < K; ++q) {
                const long r = static_cast<long>(i * stride + p) - static_cast<long>(pad);
                const long s = static_cast<long>(j * stride + q) - static_cast<long>(pad);
                if (r < 0 || s < 0 || r >= static_cast<long>(H) || s >= static_cast<long>(W)) continue;
                acc += x.at(b, c, static_cast<std::size_t>(r), static_cast<std::size_t>(s)) * w.at(o, c, p, q);
              }
          y.at(b, o, i, j) = acc;
        }
  return y;
}

struct GradCheck {
  double max_rel_error = 0;  // max |analytic - numeric| / max |numeric|
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-h interval crosses a kink
};

// Sign of every input element of a piecewise-linear op (relu, leaky_relu,
// abs) reachable from root, in a fixed traversal order.
inline std::vector<bool> kink_signature(const clade::Tensor<double>& root) {
  std::vector<bool> sig;
  std::vector<const clade::Node<double>*> stack{root.node().get()};
  std::unordered_set<const clade::Node<double>*> seen;
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if ((n->op == "relu" || n->op == "leaky_relu" || n->op == "abs") && !n->parents.empty())
      for (double v : n->parents[0]->value.values()) sig.push_back(v > 0);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  return sig;
}

// Central differences against reverse mode for every element of every
// tensor in `wrt`. `loss` must rebuild the graph from the leaves. With
// skip_kinks, coordinates where the perturbation flips the sign of a
// relu/leaky_relu/abs input are not differentiable within h and are skipped.
inline GradCheck finite_difference_check(const std::function<clade::Tensor<double>()>& loss,
                                         std::vector<clade::Tensor<double>> wrt, double h = 1e-4,
                                         bool skip_kinks = false) {
  for (auto& t : wrt) t.zero_grad();
  clade::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (auto& t : wrt) analytic.push_back(t.grad().values());
  double max_err = 0, max_num = 0;
  GradCheck out;
  for (std::size_t p = 0; p < wrt.size(); ++p) {
    for (std::size_t i = 0; i < wrt[p].size(); ++i) {
      const double orig = wrt[p].value()[i];
      wrt[p].mutable_value()[i] = orig + h;
      const auto lp = loss();
      wrt[p].mutable_value()[i] = orig - h;
      const auto lm = loss();
      wrt[p].mutable_value()[i] = orig;
      if (skip_kinks && kink_signature(lp) != kink_signature(lm)) {
        ++out.skipped;
        continue;
      }
      const double num = (lp.item() - lm.item()) / (2 * h);
      max_err = std::max(max_err, std::abs(num - analytic[p][i]));
      max_num = std::max(max_num, std::abs(num));
      ++out.checked;
    }
  }
  for (auto& t : wrt) t.zero_grad();
  out.max_rel_error = max_err / std::max(max_num, 1e-12);
  return out;
}

// Natural spline by assembling the full n x n system and solving it with
// partial-pivot Gaussian elimination, then evaluating the textbook piecewise
// cubic. Independent of the library's Thomas solver.
struct DenseSpline {
  std::vector<double> y, m;
  explicit DenseSpline(std::vector<double> samples) : y(std::move(samples)) {
    const std::size_t n = y.size();
    std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
    A[0][0] = 1;
    A[n - 1][n - 1] = 1;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      A[i][i - 1] = 1;
      A[i][i] = 4;
      A[i][i + 1] = 1;
      A[i][n] = 6 * (y[i - 1] - 2 * y[i] + y[i + 1]);
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
      std::swap(A[c], A[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == c) continue;
        const double f = A[r][c] / A[c][c];
        for (std::size_t k = c; k <= n; ++k) A[r][k] -= f * A[c][k];
      }
    }
    m.resize(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = A[i][n] / A[i][i];
  }
  double operator()(double x) const {
    const double last = static_cast<double>(y.size() - 1);
    if (x <= 0) return y[0] + x * ((y[1] - y[0]) - (2 * m[0] + m[1]) / 6);
    if (x >= last) {
      const std::size_t n = y.size();
      return y[n - 1] + (x - last) * ((y[n - 1] - y[n - 2]) + (m[n - 2] + 2 * m[n - 1]) / 6);
    }
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double t = x - static_cast<double>(i);
    const double a = 1 - t;
    return a * y[i] + t * y[i + 1] + ((a * a * a - a) * m[i] + (t * t * t - t) * m[i + 1]) / 6;
  }
};

// Fixed random projection turning any tensor into a scalar loss, so that
// gradients of non-scalar ops are exercised in every output direction.
inline clade::Tensor<double> project(const clade::Tensor<double>& t, std::uint64_t seed) {
  return clade::sum(clade::mul(t, clade::Tensor<double>::constant(random_array(t.shape(), seed))));
}

}  // namespace testing
