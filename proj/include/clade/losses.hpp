#pragma once

#include <functional>
#include <string>
#include <utility>

#include "clade/ops.hpp"
#include "clade/volume.hpp"

namespace clade {

enum class AdversarialMode { bce_logits, least_squares };
AdversarialMode parse_adversarial_mode(const std::string& s);
std::string adversarial_mode_name(AdversarialMode m);

// Which reading of the gradient-mapping objective to use. symmetric: both
// cycles, both Sobel directions. literal: the single-expression form
// |Sx(G_Y(G_X(y))) - Sx(y) + Sy(G_X(G_Y(y))) - Sy(y)|, kept for ablation.
enum class GmapForm { symmetric, literal };
GmapForm parse_gmap_form(const std::string& s);
std::string gmap_form_name(GmapForm f);

struct LossWeights {
  double lambda_cyc = 1.0;
  double lambda_ident = 1.0;
  double lambda_gmap = 5.0;
  void validate() const;
};

// Scalar values of every objective term for one generator step.
struct LossBreakdown {
  double adv_forward = 0;   // G_X fooling D_Y
  double adv_backward = 0;  // G_Y fooling D_X
  double cyc = 0;
  double ident = 0;
  double gmap = 0;
  double total = 0;
};

// total = adv_forward + adv_backward + l_cyc*cyc + l_ident*ident + l_gmap*gmap
LossBreakdown compose_breakdown(double adv_forward, double adv_backward, double cyc, double ident, double gmap,
                                const LossWeights& w);
std::string loss_csv_header();
std::string loss_csv_row(std::uint64_t step, const LossBreakdown& b);

// Sobel gradients of [B,1,H,W] images with reflection padding (same size).
// Sx = [[-1,0,1],[-2,0,2],[-1,0,1]] along columns, Sy = Sx^T along rows.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sobel_gradients(const Tensor<T>& img);
std::pair<Image, Image> sobel_gradients(const Image& img);

// Discriminator objective on real and (detached) fake logit maps:
// bce: 0.5 * (BCE(real, 1) + BCE(fake, 0)); least squares: 0.5 * (mean
// (real-1)^2 + mean fake^2). Both average over the logit map.
template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits, AdversarialMode mode);
// Non-saturating generator objective: BCE(fake, 1) or mean (fake-1)^2.
template <typename T>
Tensor<T> generator_adversarial_loss(const Tensor<T>& fake_logits, AdversarialMode mode);

template <typename T>
struct AdversarialPair {
  Tensor<T> d_loss;
  Tensor<T> g_loss;
};
template <typename T>
AdversarialPair<T> adversarial_losses(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                                      AdversarialMode mode);

// mean|x_cycled - x| + mean|y_cycled - y|
template <typename T>
Tensor<T> cycle_loss(const Tensor<T>& x, const Tensor<T>& x_cycled, const Tensor<T>& y, const Tensor<T>& y_cycled);

// mean|G_X(y) - y| + mean|G_Y(x) - x|, from precomputed generator outputs.
template <typename T>
Tensor<T> identity_loss(const Tensor<T>& gx_of_y, const Tensor<T>& y, const Tensor<T>& gy_of_x, const Tensor<T>& x);

template <typename T>
using TensorMap = std::function<Tensor<T>(const Tensor<T>&)>;
template <typename T>
Tensor<T> identity_loss(const TensorMap<T>& g_x, const TensorMap<T>& g_y, const Tensor<T>& x, const Tensor<T>& y);

// Sum over both cycles and both Sobel directions of mean|S(cycled) - S(orig)|.
template <typename T>
Tensor<T> gradient_mapping_loss(const Tensor<T>& x, const Tensor<T>& x_cycled, const Tensor<T>& y,
                                const Tensor<T>& y_cycled);
// mean|Sx(y_xy) - Sx(y) + Sy(y_yx) - Sy(y)| with y_xy = G_Y(G_X(y)) and
// y_yx = G_X(G_Y(y)).
template <typename T>
Tensor<T> gradient_mapping_loss_literal(const Tensor<T>& y, const Tensor<T>& y_xy, const Tensor<T>& y_yx);

template <typename T>
struct LossTerms {
  Tensor<T> adv_forward, adv_backward, cyc, ident, gmap;
};

// Weighted sum; throws NumericError naming the first non-finite term.
template <typename T>
Tensor<T> total_loss(const LossTerms<T>& terms, const LossWeights& w, LossBreakdown* breakdown = nullptr);

}  // namespace clade
