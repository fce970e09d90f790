// Convolution, transposed convolution and weight demodulation.
//
// Both convolutions lower to im2col + GEMM per sample; the GEMM is the
// dispatched kernel from clade/kernels.hpp. Column buffers are recomputed in
// backward rather than kept alive in the graph.

#include <cmath>
#include <vector>

#include "clade/error.hpp"
#include "clade/kernels.hpp"
#include "clade/ops.hpp"

namespace clade {
namespace {

std::size_t reflect_index(long i, long n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

struct Geometry {
  std::size_t c, h, w;    // input planes
  std::size_t hp, wp;     // padded input planes
  std::size_t k, stride;  // square kernel
  std::size_t ho, wo;     // output planes
};

// src [C,H,W] -> dst [C,Hp,Wp]
template <typename T>
void pad_planes(const T* src, T* dst, const Geometry& g, const Padding& p) {
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* s = src + c * g.h * g.w;
    T* d = dst + c * g.hp * g.wp;
    for (std::size_t y = 0; y < g.hp; ++y) {
      const long sy = static_cast<long>(y) - static_cast<long>(p.top);
      for (std::size_t x = 0; x < g.wp; ++x) {
        const long sx = static_cast<long>(x) - static_cast<long>(p.left);
        T v = 0;
        if (p.mode == PadMode::reflect) {
          v = s[reflect_index(sy, g.h) * g.w + reflect_index(sx, g.w)];
        } else if (sy >= 0 && sx >= 0 && sy < static_cast<long>(g.h) && sx < static_cast<long>(g.w)) {
          v = s[sy * g.w + sx];
        }
        d[y * g.wp + x] = v;
      }
    }
  }
}

// Adjoint of pad_planes: folds padded gradients back onto source pixels.
template <typename T>
void unpad_planes_add(const T* dpad, T* dsrc, const Geometry& g, const Padding& p) {
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* s = dpad + c * g.hp * g.wp;
    T* d = dsrc + c * g.h * g.w;
    for (std::size_t y = 0; y < g.hp; ++y) {
      const long sy = static_cast<long>(y) - static_cast<long>(p.top);
      for (std::size_t x = 0; x < g.wp; ++x) {
        const long sx = static_cast<long>(x) - static_cast<long>(p.left);
        if (p.mode == PadMode::reflect) {
          d[reflect_index(sy, g.h) * g.w + reflect_index(sx, g.w)] += s[y * g.wp + x];
        } else if (sy >= 0 && sx >= 0 && sy < static_cast<long>(g.h) && sx < static_cast<long>(g.w)) {
          d[sy * g.w + sx] += s[y * g.wp + x];
        }
      }
    }
  }
}

// padded [C,Hp,Wp] -> cols [C*K*K, Ho*Wo]
template <typename T>
void im2col(const T* padded, T* cols, const Geometry& g) {
  const std::size_t n = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        const T* plane = padded + c * g.hp * g.wp;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const T* src = plane + (oy * g.stride + ky) * g.wp + kx;
          T* dst = row + oy * g.wo;
          if (g.stride == 1) {
            for (std::size_t ox = 0; ox < g.wo; ++ox) dst[ox] = src[ox];
          } else {
            for (std::size_t ox = 0; ox < g.wo; ++ox) dst[ox] = src[ox * g.stride];
          }
        }
      }
}

// Adjoint of im2col: cols [C*K*K, Ho*Wo] accumulated into padded [C,Hp,Wp].
template <typename T>
void col2im_add(const T* cols, T* padded, const Geometry& g) {
  const std::size_t n = g.ho * g.wo;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        T* plane = padded + c * g.hp * g.wp;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          T* dst = plane + (oy * g.stride + ky) * g.wp + kx;
          const T* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) dst[ox * g.stride] += src[ox];
        }
      }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T b = bias[c];
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += b;
  }
}

template <typename T>
void accumulate_bias_grad(const T* dout, T* dbias, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += dout[c * plane + i];
    dbias[c] += s;
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvWeights<T>& weights, std::size_t stride,
                 const Padding& padding) {
  const Shape& xs = input.shape();
  const Shape& ws = weights.kernel.shape();
  require(xs.size() == 4, "conv2d: input must be [B,C,H,W], got " + shape_str(xs));
  require(ws.size() == 4, "conv2d: kernel must be [O,C,K,K], got " + shape_str(ws));
  require(ws[2] == ws[3], "conv2d: kernel must be square, got " + shape_str(ws));
  require(ws[1] == xs[1], "conv2d: kernel in_channels " + std::to_string(ws[1]) +
                              " != input channels " + std::to_string(xs[1]));
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  if (weights.bias.defined()) {
    require(weights.bias.shape() == Shape{ws[0]},
            "conv2d: bias shape " + shape_str(weights.bias.shape()) + " != [" + std::to_string(ws[0]) + "]");
  }
  if (padding.mode == PadMode::reflect) {
    require(padding.top < xs[2] && padding.bottom < xs[2] && padding.left < xs[3] && padding.right < xs[3],
            "conv2d: reflection padding must be smaller than the input extent " + shape_str(xs));
  }
  if (!input.value().all_finite()) throw NumericError("conv2d: non-finite value in input");

  Geometry g{xs[1], xs[2], xs[3], xs[2] + padding.total_h(), xs[3] + padding.total_w(), ws[2], stride, 0, 0};
  require(g.hp >= g.k && g.wp >= g.k, "conv2d: kernel " + std::to_string(g.k) +
                                          " does not fit padded input " + shape_str(xs));
  g.ho = (g.hp - g.k) / stride + 1;
  g.wo = (g.wp - g.k) / stride + 1;
  const std::size_t batch = xs[0], out_c = ws[0];
  const std::size_t ckk = g.c * g.k * g.k, n = g.ho * g.wo;

  Array<T> out({batch, out_c, g.ho, g.wo});
  std::vector<T> padded(g.c * g.hp * g.wp), cols(ckk * n);
  const T* w = weights.kernel.data();
  for (std::size_t b = 0; b < batch; ++b) {
    pad_planes(input.data() + b * g.c * g.h * g.w, padded.data(), g, padding);
    im2col(padded.data(), cols.data(), g);
    T* ob = out.data() + b * out_c * n;
    kernels::gemm<T>(false, false, out_c, n, ckk, w, ckk, cols.data(), n, T(0), ob, n);
    if (weights.bias.defined()) add_bias(ob, weights.bias.data(), out_c, n);
  }

  std::vector<Tensor<T>> parents{input, weights.kernel};
  if (weights.bias.defined()) parents.push_back(weights.bias);
  const bool has_bias = weights.bias.defined();
  return Tensor<T>::from_op(std::move(out), "conv2d", parents, [g, padding, batch, out_c, has_bias](Node<T>& self) {
    auto& x = *self.parents[0];
    auto& wk = *self.parents[1];
    const std::size_t ckk = g.c * g.k * g.k, n = g.ho * g.wo;
    std::vector<T> padded(g.c * g.hp * g.wp), cols(ckk * n);
    const T* dout = self.grad.data();
    T* dw = wk.requires_grad ? wk.ensure_grad().data() : nullptr;
    T* dx = x.requires_grad ? x.ensure_grad().data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* db = dout + b * out_c * n;
      if (dw) {
        pad_planes(x.value.data() + b * g.c * g.h * g.w, padded.data(), g, padding);
        im2col(padded.data(), cols.data(), g);
        kernels::gemm<T>(false, true, out_c, ckk, n, db, n, cols.data(), n, T(1), dw, ckk);
      }
      if (dx) {
        kernels::gemm<T>(true, false, ckk, n, out_c, wk.value.data(), ckk, db, n, T(0), cols.data(), n);
        std::fill(padded.begin(), padded.end(), T(0));
        col2im_add(cols.data(), padded.data(), g);
        unpad_planes_add(padded.data(), dx + b * g.c * g.h * g.w, g, padding);
      }
    }
    if (has_bias && self.parents[2]->requires_grad) {
      T* dbias = self.parents[2]->ensure_grad().data();
      for (std::size_t b = 0; b < batch; ++b) accumulate_bias_grad(dout + b * out_c * n, dbias, out_c, n);
    }
  });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const ConvWeights<T>& weights, std::size_t stride,
                           const Padding& crop) {
  const Shape& xs = input.shape();
  const Shape& ws = weights.kernel.shape();
  require(xs.size() == 4, "conv_transpose2d: input must be [B,C,H,W], got " + shape_str(xs));
  require(ws.size() == 4, "conv_transpose2d: kernel must be [Cin,Cout,K,K], got " + shape_str(ws));
  require(ws[2] == ws[3], "conv_transpose2d: kernel must be square, got " + shape_str(ws));
  require(ws[0] == xs[1], "conv_transpose2d: kernel in_channels " + std::to_string(ws[0]) +
                              " != input channels " + std::to_string(xs[1]));
  if (stride < 1) throw ContractError("conv_transpose2d: stride must be >= 1");
  if (crop.mode != PadMode::zero) throw ContractError("conv_transpose2d: only zero padding is defined");
  if (weights.bias.defined()) {
    require(weights.bias.shape() == Shape{ws[1]},
            "conv_transpose2d: bias shape " + shape_str(weights.bias.shape()) + " != [" + std::to_string(ws[1]) + "]");
  }
  if (!input.value().all_finite()) throw NumericError("conv_transpose2d: non-finite value in input");

  const std::size_t batch = xs[0], in_c = xs[1], out_c = ws[1], k = ws[2];
  const std::size_t h = xs[2], w = xs[3];
  const std::size_t hf = (h - 1) * stride + k, wf = (w - 1) * stride + k;
  require(crop.total_h() < hf && crop.total_w() < wf, "conv_transpose2d: padding removes the whole output");
  const std::size_t ho = hf - crop.total_h(), wo = wf - crop.total_w();
  // Geometry of the forward conv this op is the adjoint of: input [Cout,Hf,Wf].
  const Geometry g{out_c, ho, wo, hf, wf, k, stride, h, w};
  const std::size_t ckk = out_c * k * k, n = h * w;

  Array<T> out({batch, out_c, ho, wo});
  std::vector<T> full(out_c * hf * wf), cols(ckk * n);
  const Padding as_pad{PadMode::zero, crop.top, crop.bottom, crop.left, crop.right};
  for (std::size_t b = 0; b < batch; ++b) {
    kernels::gemm<T>(true, false, ckk, n, in_c, weights.kernel.data(), ckk, input.data() + b * in_c * n, n, T(0),
                     cols.data(), n);
    std::fill(full.begin(), full.end(), T(0));
    col2im_add(cols.data(), full.data(), g);
    T* ob = out.data() + b * out_c * ho * wo;
    for (std::size_t c = 0; c < out_c; ++c)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x)
          ob[(c * ho + y) * wo + x] = full[(c * hf + y + crop.top) * wf + x + crop.left];
    if (weights.bias.defined()) add_bias(ob, weights.bias.data(), out_c, ho * wo);
  }

  std::vector<Tensor<T>> parents{input, weights.kernel};
  if (weights.bias.defined()) parents.push_back(weights.bias);
  const bool has_bias = weights.bias.defined();
  return Tensor<T>::from_op(
      std::move(out), "conv_transpose2d", parents,
      [g, as_pad, batch, in_c, out_c, has_bias](Node<T>& self) {
        auto& x = *self.parents[0];
        auto& wk = *self.parents[1];
        const std::size_t ckk = g.c * g.k * g.k, n = g.ho * g.wo, plane = g.h * g.w;
        std::vector<T> full(g.c * g.hp * g.wp), cols(ckk * n);
        const T* dout = self.grad.data();
        T* dw = wk.requires_grad ? wk.ensure_grad().data() : nullptr;
        T* dx = x.requires_grad ? x.ensure_grad().data() : nullptr;
        for (std::size_t b = 0; b < batch; ++b) {
          // Zero-extend the cropped gradient back to the full output and
          // run the forward conv on it.
          pad_planes(dout + b * g.c * plane, full.data(), g, as_pad);
          im2col(full.data(), cols.data(), g);
          if (dx) {
            kernels::gemm<T>(false, false, in_c, n, ckk, wk.value.data(), ckk, cols.data(), n, T(1),
                             dx + b * in_c * n, n);
          }
          if (dw) {
            kernels::gemm<T>(false, true, in_c, ckk, n, x.value.data() + b * in_c * n, n, cols.data(), n, T(1),
                             dw, ckk);
          }
        }
        if (has_bias && self.parents[2]->requires_grad) {
          T* dbias = self.parents[2]->ensure_grad().data();
          for (std::size_t b = 0; b < batch; ++b) accumulate_bias_grad(dout + b * out_c * plane, dbias, out_c, plane);
        }
      });
}

template <typename T>
Tensor<T> demodulate(const Tensor<T>& kernel, double eps, std::size_t channel_axis) {
  const Shape& ws = kernel.shape();
  require(ws.size() == 4, "demodulate: kernel must be rank 4, got " + shape_str(ws));
  require(channel_axis < 2, "demodulate: channel axis must be 0 or 1");
  if (!(eps > 0)) throw ContractError("demodulate: eps must be positive");
  const std::size_t groups = ws[channel_axis];
  const std::size_t outer = ws[0], inner = ws[1], kk = ws[2] * ws[3];
  auto group_of = [=](std::size_t o, std::size_t i) { return channel_axis == 0 ? o : i; };

  std::vector<double> sumsq(groups, 0.0);
  const T* w = kernel.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i)
      for (std::size_t p = 0; p < kk; ++p) {
        const double v = w[(o * inner + i) * kk + p];
        sumsq[group_of(o, i)] += v * v;
      }
  std::vector<T> scale(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) scale[gi] = static_cast<T>(1.0 / std::sqrt(sumsq[gi] + eps));

  Array<T> out(ws);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i)
      for (std::size_t p = 0; p < kk; ++p) {
        const std::size_t idx = (o * inner + i) * kk + p;
        out[idx] = w[idx] * scale[group_of(o, i)];
      }

  return Tensor<T>::from_op(std::move(out), "demodulate", {kernel}, [scale, outer, inner, kk, groups, group_of](Node<T>& self) {
    auto& src = *self.parents[0];
    const T* w = src.value.data();
    const T* dy = self.grad.data();
    // d/dw [w * s] with s = (sum w^2 + eps)^-1/2:  s*dy - w * s^3 * <dy, w>_group
    std::vector<double> proj(groups, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i)
        for (std::size_t p = 0; p < kk; ++p) {
          const std::size_t idx = (o * inner + i) * kk + p;
          proj[group_of(o, i)] += static_cast<double>(dy[idx]) * w[idx];
        }
    T* dw = src.ensure_grad().data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i)
        for (std::size_t p = 0; p < kk; ++p) {
          const std::size_t idx = (o * inner + i) * kk + p;
          const std::size_t gi = group_of(o, i);
          const double s = scale[gi];
          dw[idx] += static_cast<T>(s * dy[idx] - static_cast<double>(w[idx]) * s * s * s * proj[gi]);
        }
  });
}

template <typename T>
ConvWeights<T> demodulate_weights(const ConvWeights<T>& weights, double eps, std::size_t channel_axis) {
  return {demodulate(weights.kernel, eps, channel_axis), weights.bias};
}

#define CLADE_INSTANTIATE_CONV(T)                                                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvWeights<T>&, std::size_t, const Padding&);    \
  template Tensor<T> conv_transpose2d<T>(const Tensor<T>&, const ConvWeights<T>&, std::size_t,           \
                                         const Padding&);                                                \
  template Tensor<T> demodulate<T>(const Tensor<T>&, double, std::size_t);                               \
  template ConvWeights<T> demodulate_weights<T>(const ConvWeights<T>&, double, std::size_t);

CLADE_INSTANTIATE_CONV(float)
CLADE_INSTANTIATE_CONV(double)

}  // namespace clade
