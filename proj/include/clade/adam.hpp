#pragma once

#include <cstdint>
#include <vector>

#include "clade/tensor.hpp"

namespace clade {

// Adam with bias correction. Defaults: lr 2e-4, beta1 0.5.
template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::vector<Array<T>> m;
  std::vector<Array<T>> v;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<Tensor<T>>& params, double lr = 2e-4, double beta1 = 0.5,
                             double beta2 = 0.999, double eps_opt = 1e-8);

// One update of every parameter from its accumulated gradient (a parameter
// with no gradient is treated as having a zero gradient). Advances step.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

}  // namespace clade
