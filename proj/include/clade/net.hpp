#pragma once

// Generator (encoder, residual blocks, decoder) and PatchGAN discriminator.
//
// A "modconv" is a convolution whose kernel is passed through
// demodulate() before use. With demodulation on, the generator has no
// normalisation layers at all; the conventional-CycleGAN ablation turns
// demodulation off and puts instance norm after every hidden convolution.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clade/checkpoint.hpp"
#include "clade/ops.hpp"

namespace clade {

enum class NormKind { none, instance };

struct GeneratorSpec {
  std::size_t in_channels = 1;
  std::size_t base_channels = 64;
  std::size_t n_residual_blocks = 6;
  bool demodulation = true;
  NormKind norm = NormKind::none;
  double eps = 1e-8;
  double init_std = 0.02;

  void validate() const;
  // CycleGAN ablation: no demodulation, instance norm in the generator.
  static GeneratorSpec conventional(std::size_t base_channels = 64, std::size_t n_residual_blocks = 6);
};

struct DiscriminatorSpec {
  std::size_t in_channels = 1;
  std::size_t base_channels = 64;
  // Number of hidden 4x4 conv blocks; the first three stride 2, the rest
  // stride 1, each doubling channels up to 8x base.
  std::size_t n_layers = 4;
  double init_std = 0.02;
  double slope = 0.2;

  void validate() const;
};

nlohmann::json to_json(const GeneratorSpec& s);
nlohmann::json to_json(const DiscriminatorSpec& s);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j);

// Ordered named parameter leaves of one network.
template <typename T>
class NetworkParams {
 public:
  void add(std::string name, Array<T> value);
  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<Tensor<T>> tensors() const;
  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  void zero_grad();
  // Sum of parameter version counters, used to detect updates.
  std::uint64_t version_sum() const;

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

template <typename T>
class Generator {
 public:
  Generator(GeneratorSpec spec, NetworkParams<T> params) : spec_(std::move(spec)), params_(std::move(params)) {}

  // [B,1,H,W] in [-1,1] -> [B,1,H,W] in (-1,1). H and W must be multiples of 4.
  Tensor<T> forward(const Tensor<T>& x) const;
  const GeneratorSpec& spec() const { return spec_; }
  NetworkParams<T>& params() { return params_; }
  const NetworkParams<T>& params() const { return params_; }

 private:
  Tensor<T> conv_layer(const Tensor<T>& x, const std::string& name, std::size_t stride, const Padding& pad,
                       bool modulated) const;
  Tensor<T> deconv_layer(const Tensor<T>& x, const std::string& name) const;
  Tensor<T> normalize(const Tensor<T>& x, const std::string& name) const;

  GeneratorSpec spec_;
  NetworkParams<T> params_;
};

template <typename T>
class Discriminator {
 public:
  Discriminator(DiscriminatorSpec spec, NetworkParams<T> params) : spec_(std::move(spec)), params_(std::move(params)) {}

  // [B,1,32,32] -> logit map [B,1,2,2].
  Tensor<T> forward(const Tensor<T>& x) const;
  const DiscriminatorSpec& spec() const { return spec_; }
  NetworkParams<T>& params() { return params_; }
  const NetworkParams<T>& params() const { return params_; }

 private:
  DiscriminatorSpec spec_;
  NetworkParams<T> params_;
};

template <typename T>
Generator<T> build_generator(const GeneratorSpec& spec, std::uint64_t seed);
template <typename T>
Discriminator<T> build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

// Writes params under "<prefix>/<name>" into ck.
template <typename T>
void store_params(Checkpoint& ck, const std::string& prefix, const NetworkParams<T>& params);
// Overwrites params from "<prefix>/<name>" entries; shapes must match.
template <typename T>
void restore_params(const Checkpoint& ck, const std::string& prefix, NetworkParams<T>& params);

// Standalone generator checkpoint with its architecture manifest embedded,
// enough to rebuild the network without the training config.
template <typename T>
void save_generator(const Generator<T>& g, const std::string& path);
template <typename T>
Generator<T> load_generator(const std::string& path, const std::string& prefix = "G_X");

}  // namespace clade
