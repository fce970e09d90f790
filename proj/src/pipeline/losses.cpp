#include "clade/losses.hpp"

#include <cmath>
#include <sstream>

#include "clade/error.hpp"

namespace clade {

AdversarialMode parse_adversarial_mode(const std::string& s) {
  if (s == "bce_logits") return AdversarialMode::bce_logits;
  if (s == "least_squares") return AdversarialMode::least_squares;
  throw ContractError("unknown adversarial mode '" + s + "'");
}

std::string adversarial_mode_name(AdversarialMode m) {
  return m == AdversarialMode::bce_logits ? "bce_logits" : "least_squares";
}

GmapForm parse_gmap_form(const std::string& s) {
  if (s == "symmetric") return GmapForm::symmetric;
  if (s == "literal") return GmapForm::literal;
  throw ContractError("unknown gmap form '" + s + "'");
}

std::string gmap_form_name(GmapForm f) { return f == GmapForm::symmetric ? "symmetric" : "literal"; }

void LossWeights::validate() const {
  for (double v : {lambda_cyc, lambda_ident, lambda_gmap})
    if (!std::isfinite(v) || v < 0) throw ContractError("loss weights must be finite and non-negative");
}

LossBreakdown compose_breakdown(double adv_forward, double adv_backward, double cyc, double ident, double gmap,
                                const LossWeights& w) {
  LossBreakdown b{adv_forward, adv_backward, cyc, ident, gmap, 0};
  b.total = adv_forward + adv_backward + w.lambda_cyc * cyc + w.lambda_ident * ident + w.lambda_gmap * gmap;
  return b;
}

std::string loss_csv_header() { return "step,adv_f,adv_b,cyc,ident,gmap,total"; }

std::string loss_csv_row(std::uint64_t step, const LossBreakdown& b) {
  std::ostringstream os;
  os.precision(9);
  os << step << ',' << b.adv_forward << ',' << b.adv_backward << ',' << b.cyc << ',' << b.ident << ',' << b.gmap
     << ',' << b.total;
  return os.str();
}

namespace {

template <typename T>
Tensor<T> sobel_kernel(bool x_direction) {
  static const double sx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  static const double sy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
  Array<T> k({1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) k[i] = static_cast<T>(x_direction ? sx[i] : sy[i]);
  return Tensor<T>::constant(std::move(k));
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> sobel_gradients(const Tensor<T>& img) {
  const Shape& s = img.shape();
  if (s.size() != 4 || s[1] != 1) throw ShapeError("sobel_gradients: input must be [B,1,H,W], got " + shape_str(s));
  if (s[2] < 3 || s[3] < 3) throw ShapeError("sobel_gradients: image must be at least 3x3");
  static const Tensor<T> kx = sobel_kernel<T>(true);
  static const Tensor<T> ky = sobel_kernel<T>(false);
  return {conv2d(img, ConvWeights<T>{kx, {}}, 1, Padding::reflect(1)),
          conv2d(img, ConvWeights<T>{ky, {}}, 1, Padding::reflect(1))};
}

std::pair<Image, Image> sobel_gradients(const Image& img) {
  Array<double> a({1, 1, img.rows, img.cols}, img.data);
  NoGradGuard guard;
  auto [gx, gy] = sobel_gradients(Tensor<double>::constant(std::move(a)));
  Image ox(img.rows, img.cols), oy(img.rows, img.cols);
  ox.data = gx.value().values();
  oy.data = gy.value().values();
  return {ox, oy};
}

template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits, AdversarialMode mode) {
  require_same(real_logits, fake_logits, "discriminator_loss");
  if (mode == AdversarialMode::bce_logits) {
    return mul_scalar(add(bce_with_logits(real_logits, 1.0), bce_with_logits(fake_logits, 0.0)), 0.5);
  }
  return mul_scalar(add(mse_to(real_logits, 1.0), mse_to(fake_logits, 0.0)), 0.5);
}

template <typename T>
Tensor<T> generator_adversarial_loss(const Tensor<T>& fake_logits, AdversarialMode mode) {
  if (mode == AdversarialMode::bce_logits) return bce_with_logits(fake_logits, 1.0);
  return mse_to(fake_logits, 1.0);
}

template <typename T>
AdversarialPair<T> adversarial_losses(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                                      AdversarialMode mode) {
  return {discriminator_loss(real_logits, fake_logits.detach(), mode), generator_adversarial_loss(fake_logits, mode)};
}

template <typename T>
Tensor<T> cycle_loss(const Tensor<T>& x, const Tensor<T>& x_cycled, const Tensor<T>& y, const Tensor<T>& y_cycled) {
  require_same(x, x_cycled, "cycle_loss");
  require_same(y, y_cycled, "cycle_loss");
  return add(l1_mean(x_cycled, x), l1_mean(y_cycled, y));
}

template <typename T>
Tensor<T> identity_loss(const Tensor<T>& gx_of_y, const Tensor<T>& y, const Tensor<T>& gy_of_x, const Tensor<T>& x) {
  require_same(gx_of_y, y, "identity_loss");
  require_same(gy_of_x, x, "identity_loss");
  return add(l1_mean(gx_of_y, y), l1_mean(gy_of_x, x));
}

template <typename T>
Tensor<T> identity_loss(const TensorMap<T>& g_x, const TensorMap<T>& g_y, const Tensor<T>& x, const Tensor<T>& y) {
  return identity_loss(g_x(y), y, g_y(x), x);
}

template <typename T>
Tensor<T> gradient_mapping_loss(const Tensor<T>& x, const Tensor<T>& x_cycled, const Tensor<T>& y,
                                const Tensor<T>& y_cycled) {
  require_same(x, x_cycled, "gradient_mapping_loss");
  require_same(y, y_cycled, "gradient_mapping_loss");
  auto [xgx, xgy] = sobel_gradients(x);
  auto [cgx, cgy] = sobel_gradients(x_cycled);
  auto [ygx, ygy] = sobel_gradients(y);
  auto [dgx, dgy] = sobel_gradients(y_cycled);
  return add(add(l1_mean(cgx, xgx), l1_mean(cgy, xgy)), add(l1_mean(dgx, ygx), l1_mean(dgy, ygy)));
}

template <typename T>
Tensor<T> gradient_mapping_loss_literal(const Tensor<T>& y, const Tensor<T>& y_xy, const Tensor<T>& y_yx) {
  require_same(y, y_xy, "gradient_mapping_loss_literal");
  require_same(y, y_yx, "gradient_mapping_loss_literal");
  auto [ygx, ygy] = sobel_gradients(y);
  Tensor<T> agx = sobel_gradients(y_xy).first;
  Tensor<T> bgy = sobel_gradients(y_yx).second;
  return mean(abs(add(sub(agx, ygx), sub(bgy, ygy))));
}

template <typename T>
Tensor<T> total_loss(const LossTerms<T>& t, const LossWeights& w, LossBreakdown* breakdown) {
  w.validate();
  const std::pair<const char*, const Tensor<T>*> named[] = {
      {"adv_forward", &t.adv_forward}, {"adv_backward", &t.adv_backward}, {"cyc", &t.cyc},
      {"ident", &t.ident},             {"gmap", &t.gmap}};
  for (const auto& [name, tensor] : named) {
    if (!tensor->defined()) throw ContractError(std::string("total_loss: term '") + name + "' is missing");
    if (tensor->size() != 1) throw ShapeError(std::string("total_loss: term '") + name + "' is not scalar");
    if (!std::isfinite(static_cast<double>(tensor->item()))) {
      throw NumericError(std::string("total_loss: term '") + name + "' is not finite");
    }
  }
  Tensor<T> total = add(t.adv_forward, t.adv_backward);
  total = add(total, mul_scalar(t.cyc, w.lambda_cyc));
  total = add(total, mul_scalar(t.ident, w.lambda_ident));
  total = add(total, mul_scalar(t.gmap, w.lambda_gmap));
  if (breakdown) {
    *breakdown = compose_breakdown(t.adv_forward.item(), t.adv_backward.item(), t.cyc.item(), t.ident.item(),
                                   t.gmap.item(), w);
  }
  return total;
}

#define CLADE_INSTANTIATE_LOSSES(T)                                                                               \
  template std::pair<Tensor<T>, Tensor<T>> sobel_gradients<T>(const Tensor<T>&);                                  \
  template Tensor<T> discriminator_loss<T>(const Tensor<T>&, const Tensor<T>&, AdversarialMode);                  \
  template Tensor<T> generator_adversarial_loss<T>(const Tensor<T>&, AdversarialMode);                            \
  template AdversarialPair<T> adversarial_losses<T>(const Tensor<T>&, const Tensor<T>&, AdversarialMode);         \
  template Tensor<T> cycle_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> identity_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> identity_loss<T>(const TensorMap<T>&, const TensorMap<T>&, const Tensor<T>&,                 \
                                      const Tensor<T>&);                                                          \
  template Tensor<T> gradient_mapping_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                              const Tensor<T>&);                                                  \
  template Tensor<T> gradient_mapping_loss_literal<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> total_loss<T>(const LossTerms<T>&, const LossWeights&, LossBreakdown*);

CLADE_INSTANTIATE_LOSSES(float)
CLADE_INSTANTIATE_LOSSES(double)

}  // namespace clade
