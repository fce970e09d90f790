#include "clade/adam.hpp"

#include <cmath>

#include "clade/error.hpp"

namespace clade {

template <typename T>
AdamState<T> make_adam_state(const std::vector<Tensor<T>>& params, double lr, double beta1, double beta2,
                             double eps_opt) {
  if (!(lr > 0)) throw ContractError("adam: lr must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ContractError("adam: betas must be in (0,1)");
  AdamState<T> s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_opt = eps_opt;
  for (const auto& p : params) {
    s.m.emplace_back(p.shape(), T(0));
    s.v.emplace_back(p.shape(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
  if (params.size() != state.m.size() || params.size() != state.v.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but state holds " +
                     std::to_string(state.m.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != state.m[i].shape()) {
      throw ShapeError("adam: parameter '" + params[i].name() + "' shape " + shape_str(params[i].shape()) +
                       " != moment shape " + shape_str(state.m[i].shape()));
    }
  }
  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const bool has = p.has_grad();
    const Array<T>& g = p.node()->grad;
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    T* w = p.mutable_value().data();
    for (std::size_t j = 0; j < state.m[i].size(); ++j) {
      const double gj = has ? static_cast<double>(g[j]) : 0.0;
      const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = state.lr * (mj / bc1) / (std::sqrt(vj / bc2) + state.eps_opt);
      w[j] = static_cast<T>(w[j] - update);
    }
  }
  state.step = t;
}

template struct AdamState<float>;
template struct AdamState<double>;
template AdamState<float> make_adam_state<float>(const std::vector<Tensor<float>>&, double, double, double, double);
template AdamState<double> make_adam_state<double>(const std::vector<Tensor<double>>&, double, double, double,
                                                   double);
template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace clade
