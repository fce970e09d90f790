#include <cmath>
#include <vector>

#include "clade/error.hpp"
#include "clade/ops.hpp"

namespace clade {
namespace {

template <typename T>
void same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Elementwise unary op where the local derivative is a function of the
// input x and output y.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, const char* name, F f, D dfdx) {
  Array<T> out(x.shape());
  const T* xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return Tensor<T>::from_op(std::move(out), name, {x}, [dfdx](Node<T>& self) {
    auto& p = *self.parents[0];
    T* dx = p.ensure_grad().data();
    const T* xv = p.value.data();
    const T* yv = self.value.data();
    const T* dy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) dx[i] += dy[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  const Shape& xs = input.shape();
  if (xs.size() != 4) throw ShapeError("instance_norm: input must be [B,C,H,W], got " + shape_str(xs));
  const std::size_t batch = xs[0], ch = xs[1], plane = xs[2] * xs[3];
  if (plane < 2) throw ShapeError("instance_norm: needs H*W >= 2, got " + shape_str(xs));
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch}) {
    throw ShapeError("instance_norm: gamma/beta must be [" + std::to_string(ch) + "], got " +
                     shape_str(gamma.shape()) + " / " + shape_str(beta.shape()));
  }
  Array<T> out(xs);
  // Normalised values and inverse std are needed by backward.
  auto xhat = std::make_shared<std::vector<T>>(input.size());
  auto inv_std = std::make_shared<std::vector<double>>(batch * ch);
  const T* x = input.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (b * ch + c) * plane;
      double mu = 0;
      for (std::size_t i = 0; i < plane; ++i) mu += x[off + i];
      mu /= static_cast<double>(plane);
      double var = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = x[off + i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(plane);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[b * ch + c] = is;
      const double g = gamma.data()[c], be = beta.data()[c];
      for (std::size_t i = 0; i < plane; ++i) {
        const double xh = (x[off + i] - mu) * is;
        (*xhat)[off + i] = static_cast<T>(xh);
        out[off + i] = static_cast<T>(g * xh + be);
      }
    }
  return Tensor<T>::from_op(std::move(out), "instance_norm", {input, gamma, beta},
                            [xhat, inv_std, batch, ch, plane](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& gn = *self.parents[1];
    auto& bn = *self.parents[2];
    const T* dy = self.grad.data();
    const T* g = gn.value.data();
    T* dx = xn.requires_grad ? xn.ensure_grad().data() : nullptr;
    T* dg = gn.requires_grad ? gn.ensure_grad().data() : nullptr;
    T* db = bn.requires_grad ? bn.ensure_grad().data() : nullptr;
    const double n = static_cast<double>(plane);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t off = (b * ch + c) * plane;
        double sum_dy = 0, sum_dy_xh = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dy[off + i];
          sum_dy_xh += static_cast<double>(dy[off + i]) * (*xhat)[off + i];
        }
        if (dg) dg[c] += static_cast<T>(sum_dy_xh);
        if (db) db[c] += static_cast<T>(sum_dy);
        if (dx) {
          // dxhat = g*dy; dx = is/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
          const double is = (*inv_std)[b * ch + c];
          const double gc = g[c];
          for (std::size_t i = 0; i < plane; ++i) {
            const double v = gc * is / n * (n * dy[off + i] - sum_dy - (*xhat)[off + i] * sum_dy_xh);
            dx[off + i] += static_cast<T>(v);
          }
        }
      }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, "relu", [](T v) { return v > T(0) ? v : T(0); },
               [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope) {
  const T s = static_cast<T>(slope);
  return unary(x, "leaky_relu", [s](T v) { return v > T(0) ? v : s * v; },
               [s](T v, T) { return v > T(0) ? T(1) : s; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
               [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(x, "abs", [](T v) { return std::abs(v); },
               [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, double c) {
  const T cc = static_cast<T>(c);
  return unary(a, "add_scalar", [cc](T v) { return v + cc; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, double c) {
  const T cc = static_cast<T>(c);
  return unary(a, "mul_scalar", [cc](T v) { return v * cc; }, [cc](T, T) { return cc; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape(a, b, "add");
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::from_op(std::move(out), "add", {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      T* d = p.ensure_grad().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape(a, b, "sub");
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<T>::from_op(std::move(out), "sub", {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const T sign = k == 0 ? T(1) : T(-1);
      T* d = p.ensure_grad().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += sign * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape(a, b, "mul");
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<T>::from_op(std::move(out), "mul", {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      T* d = pa.ensure_grad().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      T* d = pb.ensure_grad().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(s)), "sum", {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    T* d = p.ensure_grad().data();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < p.value.size(); ++i) d[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
  const double n = static_cast<double>(x.size());
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(s / n)), "mean", {x}, [n](Node<T>& self) {
    auto& p = *self.parents[0];
    T* d = p.ensure_grad().data();
    const T g = static_cast<T>(self.grad[0] / n);
    for (std::size_t i = 0; i < p.value.size(); ++i) d[i] += g;
  });
}

template <typename T>
Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  same_shape(a, b, "l1_mean");
  return mean(abs(sub(a, b)));
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, double target) {
  const std::size_t n = logits.size();
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.data()[i];
    s += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  }
  return Tensor<T>::from_op(Array<T>({1}, static_cast<T>(s / n)), "bce_with_logits", {logits},
                            [target, n](Node<T>& self) {
    auto& p = *self.parents[0];
    T* d = p.ensure_grad().data();
    const double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = p.value[i];
      const double sig = 1.0 / (1.0 + std::exp(-z));
      d[i] += static_cast<T>(g * (sig - target));
    }
  });
}

template <typename T>
Tensor<T> mse_to(const Tensor<T>& x, double target) {
  return mean(square(add_scalar(x, -target)));
}

template <typename T>
void check_finite(const Tensor<T>& x, const std::string& where) {
  if (!x.value().all_finite()) throw NumericError("non-finite value produced by " + where);
}

#define CLADE_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> instance_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);     \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                          \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, double);                                            \
  template Tensor<T> tanh<T>(const Tensor<T>&);                                                          \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                       \
  template Tensor<T> abs<T>(const Tensor<T>&);                                                           \
  template Tensor<T> square<T>(const Tensor<T>&);                                                        \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, double);                                            \
  template Tensor<T> mul_scalar<T>(const Tensor<T>&, double);                                            \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                           \
  template Tensor<T> mean<T>(const Tensor<T>&);                                                          \
  template Tensor<T> l1_mean<T>(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> bce_with_logits<T>(const Tensor<T>&, double);                                       \
  template Tensor<T> mse_to<T>(const Tensor<T>&, double);                                                \
  template void check_finite<T>(const Tensor<T>&, const std::string&);

CLADE_INSTANTIATE_OPS(float)
CLADE_INSTANTIATE_OPS(double)

}  // namespace clade
