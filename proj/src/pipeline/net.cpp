#include "clade/net.hpp"

#include <random>

#include "clade/error.hpp"

namespace clade {

void GeneratorSpec::validate() const {
  if (in_channels != 1) throw ContractError("generator: in_channels must be 1");
  if (base_channels < 1) throw ContractError("generator: base_channels must be >= 1");
  if (demodulation && norm == NormKind::instance) {
    throw ContractError("generator: demodulation and instance norm are mutually exclusive");
  }
  if (!(eps > 0)) throw ContractError("generator: eps must be positive");
}

GeneratorSpec GeneratorSpec::conventional(std::size_t base_channels, std::size_t n_residual_blocks) {
  GeneratorSpec s;
  s.base_channels = base_channels;
  s.n_residual_blocks = n_residual_blocks;
  s.demodulation = false;
  s.norm = NormKind::instance;
  return s;
}

void DiscriminatorSpec::validate() const {
  if (in_channels != 1) throw ContractError("discriminator: in_channels must be 1");
  if (base_channels < 1) throw ContractError("discriminator: base_channels must be >= 1");
  if (n_layers < 1 || n_layers > 5) throw ContractError("discriminator: n_layers must be in [1,5]");
}

nlohmann::json to_json(const GeneratorSpec& s) {
  return {{"in_channels", s.in_channels},
          {"base_channels", s.base_channels},
          {"n_residual_blocks", s.n_residual_blocks},
          {"demodulation", s.demodulation},
          {"norm", s.norm == NormKind::instance ? "instance" : "none"},
          {"eps", s.eps},
          {"init_std", s.init_std},
          // Layer hyperparameters chosen here rather than read from figures.
          {"layers", "reflect7x7-s2-s2-resblocks-convT-convT-reflect7x7-tanh"}};
}

nlohmann::json to_json(const DiscriminatorSpec& s) {
  return {{"in_channels", s.in_channels}, {"base_channels", s.base_channels}, {"n_layers", s.n_layers},
          {"init_std", s.init_std},       {"slope", s.slope},                 {"layers", "patchgan-4x4"}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  try {
    s.in_channels = j.value("in_channels", s.in_channels);
    s.base_channels = j.value("base_channels", s.base_channels);
    s.n_residual_blocks = j.value("n_residual_blocks", s.n_residual_blocks);
    s.demodulation = j.value("demodulation", s.demodulation);
    const std::string norm = j.value("norm", std::string("none"));
    if (norm == "instance") {
      s.norm = NormKind::instance;
    } else if (norm == "none") {
      s.norm = NormKind::none;
    } else {
      throw FormatError("generator spec: unknown norm '" + norm + "'");
    }
    s.eps = j.value("eps", s.eps);
    s.init_std = j.value("init_std", s.init_std);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("generator spec is malformed: ") + e.what());
  }
  s.validate();
  return s;
}

DiscriminatorSpec discriminator_spec_from_json(const nlohmann::json& j) {
  DiscriminatorSpec s;
  try {
    s.in_channels = j.value("in_channels", s.in_channels);
    s.base_channels = j.value("base_channels", s.base_channels);
    s.n_layers = j.value("n_layers", s.n_layers);
    s.init_std = j.value("init_std", s.init_std);
    s.slope = j.value("slope", s.slope);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("discriminator spec is malformed: ") + e.what());
  }
  s.validate();
  return s;
}

// ---- NetworkParams ----

template <typename T>
void NetworkParams<T>::add(std::string name, Array<T> value) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  Tensor<T> t = Tensor<T>::parameter(std::move(value), name);
  entries_.emplace_back(std::move(name), std::move(t));
}

template <typename T>
const Tensor<T>& NetworkParams<T>::at(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
Tensor<T>& NetworkParams<T>::at(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
bool NetworkParams<T>::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

template <typename T>
std::size_t NetworkParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

template <typename T>
std::vector<Tensor<T>> NetworkParams<T>::tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

template <typename T>
void NetworkParams<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <typename T>
std::uint64_t NetworkParams<T>::version_sum() const {
  std::uint64_t s = 0;
  for (const auto& e : entries_) s += e.second.version();
  return s;
}

// ---- construction ----

namespace {

template <typename T>
class Initializer {
 public:
  Initializer(std::uint64_t seed, double std) : rng_(seed), normal_(0.0, std) {}

  void conv(NetworkParams<T>& p, const std::string& name, Shape kernel_shape, std::size_t bias_len) {
    Array<T> w(kernel_shape);
    for (auto& v : w.values()) v = static_cast<T>(normal_(rng_));
    p.add(name + ".weight", std::move(w));
    p.add(name + ".bias", Array<T>({bias_len}, T(0)));
  }
  void norm(NetworkParams<T>& p, const std::string& name, std::size_t channels) {
    p.add(name + ".gamma", Array<T>({channels}, T(1)));
    p.add(name + ".beta", Array<T>({channels}, T(0)));
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace

template <typename T>
Generator<T> build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams<T> p;
  Initializer<T> init(seed, spec.init_std);
  const std::size_t c = spec.base_channels;
  const bool in = spec.norm == NormKind::instance;
  init.conv(p, "enc0", {c, spec.in_channels, 7, 7}, c);
  if (in) init.norm(p, "enc0.norm", c);
  init.conv(p, "enc1", {2 * c, c, 3, 3}, 2 * c);
  if (in) init.norm(p, "enc1.norm", 2 * c);
  init.conv(p, "enc2", {4 * c, 2 * c, 3, 3}, 4 * c);
  if (in) init.norm(p, "enc2.norm", 4 * c);
  for (std::size_t b = 0; b < spec.n_residual_blocks; ++b) {
    for (int k = 1; k <= 2; ++k) {
      const std::string name = "res" + std::to_string(b) + ".conv" + std::to_string(k);
      init.conv(p, name, {4 * c, 4 * c, 3, 3}, 4 * c);
      if (in) init.norm(p, name + ".norm", 4 * c);
    }
  }
  // Transposed kernels are [in, out, k, k].
  init.conv(p, "dec0", {4 * c, 2 * c, 3, 3}, 2 * c);
  if (in) init.norm(p, "dec0.norm", 2 * c);
  init.conv(p, "dec1", {2 * c, c, 3, 3}, c);
  if (in) init.norm(p, "dec1.norm", c);
  init.conv(p, "out", {spec.in_channels, c, 7, 7}, spec.in_channels);
  return Generator<T>(spec, std::move(p));
}

template <typename T>
Discriminator<T> build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams<T> p;
  Initializer<T> init(seed, spec.init_std);
  std::size_t prev = spec.in_channels;
  for (std::size_t i = 0; i < spec.n_layers; ++i) {
    const std::size_t ch = spec.base_channels * std::min<std::size_t>(std::size_t{1} << i, 8);
    const std::string name = "layer" + std::to_string(i);
    init.conv(p, name, {ch, prev, 4, 4}, ch);
    if (i > 0) init.norm(p, name + ".norm", ch);
    prev = ch;
  }
  init.conv(p, "final", {1, prev, 4, 4}, 1);
  return Discriminator<T>(spec, std::move(p));
}

// ---- forward ----

template <typename T>
Tensor<T> Generator<T>::normalize(const Tensor<T>& x, const std::string& name) const {
  if (spec_.norm != NormKind::instance) return x;
  return instance_norm(x, params_.at(name + ".norm.gamma"), params_.at(name + ".norm.beta"));
}

template <typename T>
Tensor<T> Generator<T>::conv_layer(const Tensor<T>& x, const std::string& name, std::size_t stride,
                                   const Padding& pad, bool modulated) const {
  ConvWeights<T> w{params_.at(name + ".weight"), params_.at(name + ".bias")};
  if (modulated && spec_.demodulation) w = demodulate_weights(w, spec_.eps, 0);
  Tensor<T> y = conv2d(x, w, stride, pad);
  check_finite(y, "generator layer " + name);
  return y;
}

template <typename T>
Tensor<T> Generator<T>::deconv_layer(const Tensor<T>& x, const std::string& name) const {
  ConvWeights<T> w{params_.at(name + ".weight"), params_.at(name + ".bias")};
  if (spec_.demodulation) w = demodulate_weights(w, spec_.eps, 1);
  // Full output is 2H+1; cropping one row/col at the top-left gives 2H.
  Tensor<T> y = conv_transpose2d(x, w, 2, Padding{PadMode::zero, 1, 0, 1, 0});
  check_finite(y, "generator layer " + name);
  return y;
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != spec_.in_channels || s[2] % 4 != 0 || s[3] % 4 != 0) {
    throw ShapeError("generator: input must be [B,1,H,W] with H,W multiples of 4, got " + shape_str(s));
  }
  check_finite(x, "generator input");
  Tensor<T> h = relu(normalize(conv_layer(x, "enc0", 1, Padding::reflect(3), true), "enc0"));
  h = relu(normalize(conv_layer(h, "enc1", 2, Padding::zeros(1), true), "enc1"));
  h = relu(normalize(conv_layer(h, "enc2", 2, Padding::zeros(1), true), "enc2"));
  for (std::size_t b = 0; b < spec_.n_residual_blocks; ++b) {
    const std::string base = "res" + std::to_string(b);
    Tensor<T> r = relu(normalize(conv_layer(h, base + ".conv1", 1, Padding::reflect(1), true), base + ".conv1"));
    r = normalize(conv_layer(r, base + ".conv2", 1, Padding::reflect(1), true), base + ".conv2");
    h = add(h, r);
  }
  h = relu(normalize(deconv_layer(h, "dec0"), "dec0"));
  h = relu(normalize(deconv_layer(h, "dec1"), "dec1"));
  Tensor<T> y = tanh(conv_layer(h, "out", 1, Padding::reflect(3), false));
  check_finite(y, "generator output");
  return y;
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != spec_.in_channels) {
    throw ShapeError("discriminator: input must be [B,1,H,W], got " + shape_str(s));
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < spec_.n_layers; ++i) {
    const std::string name = "layer" + std::to_string(i);
    const std::size_t stride = i < 3 ? 2 : 1;
    h = conv2d(h, {params_.at(name + ".weight"), params_.at(name + ".bias")}, stride, Padding::zeros(1));
    if (i > 0) h = instance_norm(h, params_.at(name + ".norm.gamma"), params_.at(name + ".norm.beta"));
    h = leaky_relu(h, spec_.slope);
    check_finite(h, "discriminator layer " + name);
  }
  h = conv2d(h, {params_.at("final.weight"), params_.at("final.bias")}, 1, Padding::zeros(1));
  check_finite(h, "discriminator output");
  return h;
}

// ---- persistence ----

template <typename T>
void store_params(Checkpoint& ck, const std::string& prefix, const NetworkParams<T>& params) {
  for (const auto& [name, t] : params.entries()) ck.add(prefix + "/" + name, t.value());
}

template <typename T>
void restore_params(const Checkpoint& ck, const std::string& prefix, NetworkParams<T>& params) {
  for (auto& [name, t] : params.entries()) {
    (void)t;
    const auto& e = ck.at(prefix + "/" + name);
    Tensor<T>& dst = params.at(name);
    if (e.shape != dst.shape()) {
      throw FormatError("checkpoint tensor '" + prefix + "/" + name + "' has shape " + shape_str(e.shape) +
                        ", architecture expects " + shape_str(dst.shape()));
    }
    auto& v = dst.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(e.values[i]);
  }
}

template <typename T>
void save_generator(const Generator<T>& g, const std::string& path) {
  Checkpoint ck;
  ck.dtype = sizeof(T) == 4 ? DType::float32 : DType::float64;
  ck.meta["kind"] = "generator";
  ck.meta["architecture"]["G_X"] = to_json(g.spec());
  store_params(ck, "G_X", g.params());
  ck.save(path);
}

template <typename T>
Generator<T> load_generator(const std::string& path, const std::string& prefix) {
  const Checkpoint ck = Checkpoint::load(path);
  if (!ck.meta.contains("architecture") || !ck.meta["architecture"].contains(prefix)) {
    throw FormatError("checkpoint '" + path + "' has no architecture manifest for '" + prefix + "'");
  }
  const GeneratorSpec spec = generator_spec_from_json(ck.meta["architecture"][prefix]);
  Generator<T> g = build_generator<T>(spec, 0);
  for (const auto& e : ck.entries()) {
    if (e.name.rfind(prefix + "/", 0) == 0 && !g.params().contains(e.name.substr(prefix.size() + 1))) {
      throw FormatError("checkpoint tensor '" + e.name + "' does not belong to the recorded architecture");
    }
  }
  restore_params(ck, prefix, g.params());
  return g;
}

#define CLADE_INSTANTIATE_NET(T)                                                                   \
  template class NetworkParams<T>;                                                                 \
  template class Generator<T>;                                                                     \
  template class Discriminator<T>;                                                                 \
  template Generator<T> build_generator<T>(const GeneratorSpec&, std::uint64_t);                   \
  template Discriminator<T> build_discriminator<T>(const DiscriminatorSpec&, std::uint64_t);       \
  template void store_params<T>(Checkpoint&, const std::string&, const NetworkParams<T>&);         \
  template void restore_params<T>(const Checkpoint&, const std::string&, NetworkParams<T>&);       \
  template void save_generator<T>(const Generator<T>&, const std::string&);                        \
  template Generator<T> load_generator<T>(const std::string&, const std::string&);

CLADE_INSTANTIATE_NET(float)
CLADE_INSTANTIATE_NET(double)

}  // namespace clade
