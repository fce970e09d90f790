#pragma once

// Differentiable operations over Tensor. Activations are [B,C,H,W].
// Convolutions are cross-correlations (no kernel flip).

#include <cstddef>

#include "clade/tensor.hpp"

namespace clade {

enum class PadMode { zero, reflect };

// Per-side padding for conv2d. For conv_transpose2d the same amounts are
// cropped from the full transposed output (only PadMode::zero is meaningful
// there).
struct Padding {
  PadMode mode = PadMode::zero;
  std::size_t top = 0, bottom = 0, left = 0, right = 0;

  static Padding none() { return {}; }
  static Padding zeros(std::size_t p) { return {PadMode::zero, p, p, p, p}; }
  static Padding reflect(std::size_t p) { return {PadMode::reflect, p, p, p, p}; }
  std::size_t total_h() const { return top + bottom; }
  std::size_t total_w() const { return left + right; }
};

// Kernel [out_channels, in_channels, k, k] plus optional bias [out_channels].
// For conv_transpose2d the kernel is [in_channels, out_channels, k, k], the
// layout of the conv2d it is the adjoint of.
template <typename T>
struct ConvWeights {
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvWeights<T>& weights, std::size_t stride,
                 const Padding& padding);

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const ConvWeights<T>& weights,
                           std::size_t stride, const Padding& crop);

// w / sqrt(sum(w^2) + eps), the sum taken over every index except
// channel_axis (0 = conv2d output channel, 1 = conv_transpose2d output
// channel).
template <typename T>
Tensor<T> demodulate(const Tensor<T>& kernel, double eps = 1e-8, std::size_t channel_axis = 0);

template <typename T>
ConvWeights<T> demodulate_weights(const ConvWeights<T>& weights, double eps = 1e-8,
                                  std::size_t channel_axis = 0);

// Per-sample, per-channel normalisation to zero mean and unit population
// variance followed by gamma * x + beta. gamma/beta have shape [C].
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                        double eps = 1e-5);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, double slope = 0.2);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, double c);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, double c);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);

// Scalar reductions, shape [1].
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// mean(|a - b|)
template <typename T> Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b);

// Mean binary cross-entropy of sigmoid(logits) against a constant target,
// computed in the overflow-free form max(z,0) - z*t + log(1 + exp(-|z|)).
template <typename T> Tensor<T> bce_with_logits(const Tensor<T>& logits, double target);

// mean((x - target)^2)
template <typename T> Tensor<T> mse_to(const Tensor<T>& x, double target);

// Throws NumericError naming `where` if any value is NaN/Inf.
template <typename T> void check_finite(const Tensor<T>& x, const std::string& where);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator*(double c, const Tensor<T>& a) { return mul_scalar(a, c); }

}  // namespace clade
