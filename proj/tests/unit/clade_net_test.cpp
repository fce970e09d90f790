#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "clade/error.hpp"
#include "clade/net.hpp"
#include "support.hpp"

using namespace clade;

namespace {

GeneratorSpec small_generator(bool demod, std::size_t base = 4, std::size_t n_res = 2) {
  GeneratorSpec s = demod ? GeneratorSpec{} : GeneratorSpec::conventional();
  s.base_channels = base;
  s.n_residual_blocks = n_res;
  return s;
}

DiscriminatorSpec small_discriminator(std::size_t base = 4) {
  DiscriminatorSpec s;
  s.base_channels = base;
  return s;
}

Tensor<double> input_patch(std::size_t batch, std::uint64_t seed) {
  return Tensor<double>::constant(testing::random_array({batch, 1, 32, 32}, seed));
}

}  // namespace

TEST_CASE("generator shape contract") {
  for (bool demod : {true, false}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto g = build_generator<double>(small_generator(demod), seed);
      const auto y = g.forward(input_patch(1, seed));
      CHECK(y.shape() == Shape{1, 1, 32, 32});
      for (double v : y.value().values()) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) < 1.0);
      }
    }
  }
  const auto g = build_generator<double>(small_generator(true), 1);
  CHECK(g.forward(input_patch(2, 4)).shape() == Shape{2, 1, 32, 32});
  CHECK_THROWS_AS(g.forward(Tensor<double>::constant(Array<double>({1, 1, 30, 32}))), ShapeError);
  CHECK_THROWS_AS(g.forward(Tensor<double>::constant(Array<double>({1, 2, 32, 32}))), ShapeError);
}

TEST_CASE("full-width generator layout") {
  const auto g = build_generator<float>(GeneratorSpec{}, 0);
  const auto& p = g.params();
  CHECK(p.at("enc0.weight").shape() == Shape{64, 1, 7, 7});
  CHECK(p.at("enc1.weight").shape() == Shape{128, 64, 3, 3});
  CHECK(p.at("enc2.weight").shape() == Shape{256, 128, 3, 3});
  CHECK(p.at("res5.conv2.weight").shape() == Shape{256, 256, 3, 3});
  CHECK_FALSE(p.contains("res6.conv1.weight"));
  CHECK(p.at("dec0.weight").shape() == Shape{256, 128, 3, 3});
  CHECK(p.at("dec1.weight").shape() == Shape{128, 64, 3, 3});
  CHECK(p.at("out.weight").shape() == Shape{1, 64, 7, 7});
}

TEST_CASE("demodulation adds no parameters") {
  // The ablation adds instance-norm affine terms; conv parameters are identical.
  const auto a = build_generator<double>(small_generator(true), 1);
  GeneratorSpec plain = small_generator(true);
  plain.demodulation = false;
  const auto b = build_generator<double>(plain, 1);
  CHECK(a.params().scalar_count() == b.params().scalar_count());
  CHECK(a.params().size() == b.params().size());
}

TEST_CASE("spec validation") {
  GeneratorSpec s;
  s.norm = NormKind::instance;
  CHECK_THROWS_AS(s.validate(), ContractError);
  s = GeneratorSpec{};
  s.base_channels = 0;
  CHECK_THROWS_AS(s.validate(), ContractError);
  DiscriminatorSpec d;
  d.n_layers = 0;
  CHECK_THROWS_AS(d.validate(), ContractError);
  const GeneratorSpec c = GeneratorSpec::conventional(8, 3);
  const GeneratorSpec back = generator_spec_from_json(to_json(c));
  CHECK(back.base_channels == 8);
  CHECK(back.n_residual_blocks == 3);
  CHECK_FALSE(back.demodulation);
  CHECK(back.norm == NormKind::instance);
}

TEST_CASE("zero final layer gives tanh of the bias") {
  auto g = build_generator<double>(small_generator(true), 7);
  for (auto& v : g.params().at("out.weight").mutable_value().values()) v = 0;
  g.params().at("out.bias").mutable_value()[0] = 0.3;
  const auto y = g.forward(input_patch(2, 1));
  for (double v : y.value().values()) CHECK(v == doctest::Approx(std::tanh(0.3)).epsilon(1e-14));
}

TEST_CASE("demodulated layers absorb kernel scale") {
  for (const char* layer : {"enc0", "enc1", "res0.conv1", "dec0", "dec1"}) {
    auto g = build_generator<double>(small_generator(true), 11);
    const auto x = input_patch(1, 5);
    const Array<double> before = g.forward(x).value();
    for (auto& v : g.params().at(std::string(layer) + ".weight").mutable_value().values()) v *= 10;
    const Array<double> after = g.forward(x).value();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      num = std::max(num, std::abs(after[i] - before[i]));
      den = std::max(den, std::abs(before[i]));
    }
    CHECK_MESSAGE(num / den < 1e-4, layer);
  }
}

TEST_CASE("no cross-batch coupling with demodulation") {
  const auto g = build_generator<double>(small_generator(true), 3);
  Array<double> x({2, 1, 32, 32});
  const Array<double> one = testing::random_array({1, 1, 32, 32}, 9);
  for (std::size_t i = 0; i < one.size(); ++i) x[i] = x[one.size() + i] = one[i];
  const auto y = g.forward(Tensor<double>::constant(x)).value();
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(y[i] == y[one.size() + i]);
}

TEST_CASE("graph structure of generator variants") {
  const auto x = input_patch(1, 2);
  const auto g = build_generator<double>(small_generator(true), 2);
  for (const auto& [name, t] : g.params().entries()) CHECK(name.find("norm") == std::string::npos);
  const auto ops = graph_ops(g.forward(x));
  CHECK(std::count(ops.begin(), ops.end(), "instance_norm") == 0);
  CHECK(std::count(ops.begin(), ops.end(), "demodulate") > 0);
  const auto c = build_generator<double>(small_generator(false), 2);
  const auto cops = graph_ops(c.forward(x));
  // enc0..2, 2 per residual block, dec0..1.
  CHECK(std::count(cops.begin(), cops.end(), "instance_norm") == 3 + 2 * 2 + 2);
  CHECK(std::count(cops.begin(), cops.end(), "demodulate") == 0);
}

TEST_CASE("demodulated pre-activations stay scale-controlled") {
  bool all_in_range = true;
  double lo = 1e9, hi = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0, 1);
    Array<double> x({1, 16, 24, 24});
    for (auto& v : x.values()) v = n01(rng);
    Array<double> w({8, 16, 3, 3});
    std::normal_distribution<double> nw(0, 0.02 + 0.1 * static_cast<double>(seed % 7));
    for (auto& v : w.values()) v = nw(rng);
    const auto k = demodulate(Tensor<double>::constant(w));
    const auto y = conv2d(Tensor<double>::constant(x), ConvWeights<double>{k, Tensor<double>::constant(Array<double>({8}))},
                          1, Padding::zeros(0))
                       .value();
    const std::size_t plane = y.dim(2) * y.dim(3);
    for (std::size_t o = 0; o < 8; ++o) {
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = y[o * plane + i];
        s += v;
        s2 += v * v;
      }
      const double m = s / static_cast<double>(plane);
      const double sd = std::sqrt(s2 / static_cast<double>(plane) - m * m);
      lo = std::min(lo, sd);
      hi = std::max(hi, sd);
      all_in_range = all_in_range && sd >= 0.5 && sd <= 2.0;
    }
  }
  INFO("std range [" << lo << ", " << hi << "]");
  CHECK(all_in_range);
}

TEST_CASE("discriminator shape and structure") {
  const auto d = build_discriminator<double>(small_discriminator(), 1);
  const auto y = d.forward(input_patch(3, 2));
  CHECK(y.shape() == Shape{3, 1, 2, 2});
  const auto full = build_discriminator<float>(DiscriminatorSpec{}, 1);
  CHECK(full.params().at("layer0.weight").shape() == Shape{64, 1, 4, 4});
  CHECK(full.params().at("layer3.weight").shape() == Shape{512, 256, 4, 4});
  CHECK(full.params().at("final.weight").shape() == Shape{1, 512, 4, 4});
  CHECK_FALSE(full.params().contains("layer0.norm.gamma"));
  CHECK(full.params().contains("layer1.norm.gamma"));
  const auto ops = graph_ops(d.forward(input_patch(1, 2)));
  CHECK(std::count(ops.begin(), ops.end(), "instance_norm") == 3);
}

TEST_CASE("zero discriminator weights give the final bias") {
  auto d = build_discriminator<double>(small_discriminator(), 1);
  for (const auto& [name, t] : d.params().entries())
    if (name.ends_with(".weight")) d.params().at(name).mutable_value().fill(0.0);
  d.params().at("final.bias").mutable_value()[0] = -0.7;
  const auto logits = d.forward(input_patch(2, 3));
  for (double v : logits.value().values()) CHECK(v == doctest::Approx(-0.7).epsilon(1e-14));
}

TEST_CASE("discriminator is per-sample") {
  const auto d = build_discriminator<double>(small_discriminator(), 4);
  const Array<double> a = testing::random_array({3, 1, 32, 32}, 8);
  Array<double> p(a.shape());
  const std::size_t n = 32 * 32;
  const std::size_t perm[3] = {2, 0, 1};
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < n; ++i) p[b * n + i] = a[perm[b] * n + i];
  const auto ya = d.forward(Tensor<double>::constant(a)).value();
  const auto yp = d.forward(Tensor<double>::constant(p)).value();
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < 4; ++i) CHECK(yp[b * 4 + i] == doctest::Approx(ya[perm[b] * 4 + i]).epsilon(1e-12));
}

// Small h keeps perturbations from crossing ReLU kinks.
TEST_CASE("network gradients match finite differences") {
  SUBCASE("generator") {
    GeneratorSpec s = small_generator(true, 1, 1);
    auto g = build_generator<double>(s, 3);
    const auto x = Tensor<double>::parameter(testing::random_array({1, 1, 32, 32}, 4));
    std::vector<Tensor<double>> wrt{x};
    for (const char* n : {"enc0.weight", "enc1.weight", "res0.conv1.weight", "dec0.weight", "out.weight", "out.bias"})
      wrt.push_back(g.params().at(n));
    const auto r = testing::finite_difference_check([&] { return testing::project(g.forward(x), 21); }, wrt, 1e-6);
    INFO("checked " << r.checked);
    CHECK(r.max_rel_error < 1e-5);
  }
  SUBCASE("conventional generator") {
    auto g = build_generator<double>(small_generator(false, 1, 1), 3);
    const auto x = Tensor<double>::parameter(testing::random_array({1, 1, 32, 32}, 4));
    std::vector<Tensor<double>> wrt{x, g.params().at("enc1.weight"), g.params().at("enc1.norm.gamma")};
    const auto r = testing::finite_difference_check([&] { return testing::project(g.forward(x), 22); }, wrt, 1e-6);
    CHECK(r.max_rel_error < 1e-5);
  }
  SUBCASE("discriminator") {
    DiscriminatorSpec s = small_discriminator(2);
    s.n_layers = 3;
    auto d = build_discriminator<double>(s, 5);
    const auto x = Tensor<double>::parameter(testing::random_array({2, 1, 32, 32}, 6));
    std::vector<Tensor<double>> wrt{x};
    for (const auto& [name, t] : d.params().entries()) wrt.push_back(t);
    const auto r = testing::finite_difference_check([&] { return testing::project(d.forward(x), 23); }, wrt, 1e-6);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("initialization is deterministic per seed") {
  const auto a = build_generator<double>(small_generator(true), 42);
  const auto b = build_generator<double>(small_generator(true), 42);
  const auto c = build_generator<double>(small_generator(true), 43);
  CHECK(a.params().at("enc1.weight").value().values() == b.params().at("enc1.weight").value().values());
  CHECK(a.params().at("enc1.weight").value().values() != c.params().at("enc1.weight").value().values());
  for (double v : a.params().at("enc1.bias").value().values()) CHECK(v == 0.0);
}

TEST_CASE("generator checkpoint round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "clade_net_test" / "g.ckpt").string();
  for (bool demod : {true, false}) {
    const auto g = build_generator<float>(small_generator(demod), 9);
    save_generator(g, path);
    const auto back = load_generator<float>(path);
    CHECK(back.spec().demodulation == demod);
    CHECK(back.params().scalar_count() == g.params().scalar_count());
    const auto x = Tensor<float>::constant(testing::random_array<float>({1, 1, 32, 32}, 1));
    CHECK(back.forward(x).value().values() == g.forward(x).value().values());
  }
  CHECK_THROWS_AS(load_generator<float>(path + ".missing"), FormatError);
}
