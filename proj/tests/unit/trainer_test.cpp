#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clade/error.hpp"
#include "clade/phantom.hpp"
#include "clade/trainer.hpp"
#include "support.hpp"

using namespace clade;
namespace fs = std::filesystem;

namespace {

TrainingConfig tiny_config() {
  TrainingConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  c.base_channels = 2;
  c.disc_base_channels = 2;
  c.n_residual_blocks = 1;
  c.max_steps_per_epoch = 3;
  c.seed = 5;
  return c;
}

const TrainingCorpora& corpora() {
  static const TrainingCorpora c = [] {
    PhantomSpec spec;
    spec.dims = {48, 48, 48};
    spec.lr_spacing_mm = 4.0;
    Primitive p;
    p.center_mm = {24, 22, 25};
    p.radii_mm = {14, 10, 12};
    p.intensity = 0.8;
    spec.primitives = {p};
    spec.edge_blur_mm = 0.8;
    spec.noise_std = 0.01;
    const auto [hr, lr] = generate_phantom(spec);
    (void)hr;
    return prepare_training_corpora(lr, 2, 11);
  }();
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "clade_trainer_test" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  TrainingConfig c = tiny_config();
  c.weights = {1, 1, 10};
  c.adversarial_mode = AdversarialMode::least_squares;
  c.gmap_form = GmapForm::literal;
  const TrainingConfig back = TrainingConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.weights.lambda_gmap == 10.0);
  CHECK(TrainingConfig::from_json(nlohmann::json::object()).to_json() == TrainingConfig{}.to_json());
  CHECK_THROWS(TrainingConfig::from_json({{"epochz", 3}}));
  CHECK_THROWS(TrainingConfig::from_json({{"epochs", "three"}}));
  for (auto bad : {nlohmann::json{{"epochs", 0}}, nlohmann::json{{"batch_size", 0}}, nlohmann::json{{"lr", 0.0}},
                   nlohmann::json{{"precision", "half"}}}) {
    CHECK_THROWS(TrainingConfig::from_json(bad).validate());
  }
}

TEST_CASE("config fingerprint") {
  TrainingConfig c;
  CHECK(c.fingerprint() == "clade");
  CHECK(c.generator_spec().norm == NormKind::none);
  c.demodulation = false;
  c.weights.lambda_gmap = 0;
  CHECK(c.fingerprint() == "conventional_cyclegan");
  CHECK(c.generator_spec().norm == NormKind::instance);
  c.weights.lambda_gmap = 5;
  CHECK(c.fingerprint() == "custom");
}

TEST_CASE("epoch selection is the argmin") {
  CHECK(select_epoch({33.7, 44.1, 23.3}) == 3);
  CHECK(select_epoch({5.0}) == 1);
  CHECK(select_epoch({2.0, 1.0, 1.0}) == 2);
  CHECK_THROWS(select_epoch({}));
}

TEST_CASE("adversarial terms with silent discriminators") {
  TrainingConfig c = tiny_config();
  c.weights = {0, 0, 0};
  c.lr = 1e-12;
  auto state = init_training_state<double>(c);
  for (auto* d : {&state.d_x, &state.d_y})
    for (const auto& [name, t] : d->params().entries()) {
      if (name.find(".norm.") != std::string::npos) continue;
      d->params().at(name).mutable_value().fill(0.0);
    }
  const auto& cs = corpora();
  const auto x = make_batch<double>(cs.x, {0, 1}, 0, 2);
  const auto y = make_batch<double>(cs.y, {0, 1}, 0, 2);
  const LossBreakdown b = train_step(state, x, y, c);
  CHECK(b.adv_forward == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(b.adv_backward == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(b.total == doctest::Approx(b.adv_forward + b.adv_backward).epsilon(1e-12));
}

TEST_CASE("each step updates every parameter exactly once") {
  const TrainingConfig c = tiny_config();
  auto state = init_training_state<float>(c);
  const auto& cs = corpora();
  const auto x = make_batch<float>(cs.x, {0, 1}, 0, 2);
  const auto y = make_batch<float>(cs.y, {2, 3}, 0, 2);
  const std::uint64_t gx0 = state.g_x.params().version_sum(), dx0 = state.d_x.params().version_sum();
  const std::uint64_t gy0 = state.g_y.params().version_sum(), dy0 = state.d_y.params().version_sum();
  train_step(state, x, y, c);
  CHECK(state.g_x.params().version_sum() - gx0 == state.g_x.params().size());
  CHECK(state.g_y.params().version_sum() - gy0 == state.g_y.params().size());
  CHECK(state.d_x.params().version_sum() - dx0 == state.d_x.params().size());
  CHECK(state.d_y.params().version_sum() - dy0 == state.d_y.params().size());
  CHECK(state.step == 1);
}

TEST_CASE("training is deterministic") {
  const TrainingConfig c = tiny_config();
  const auto& cs = corpora();
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const auto ra = run_training(c, cs.x, cs.y, a);
  const auto rb = run_training(c, cs.x, cs.y, b);
  REQUIRE(ra.history.size() == 6);
  for (std::size_t i = 0; i < ra.history.size(); ++i) CHECK(ra.history[i].total == rb.history[i].total);
  CHECK(slurp(a / "checkpoints" / "epoch_002.ckpt") == slurp(b / "checkpoints" / "epoch_002.ckpt"));
  CHECK(slurp(a / "losses.csv") == slurp(b / "losses.csv"));
  CHECK(slurp(a / "generator_best.ckpt") == slurp(b / "generator_best.ckpt"));
}

TEST_CASE("run outputs for a single epoch") {
  TrainingConfig c = tiny_config();
  c.epochs = 1;
  const fs::path d = fresh_dir("one_epoch");
  const auto r = run_training(c, corpora().x, corpora().y, d);
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(d / "checkpoints")) ckpts += e.path().extension() == ".ckpt";
  CHECK(ckpts == 1);
  CHECK(line_count(d / "eval.csv") == 2);
  CHECK(line_count(d / "losses.csv") == 1 + 3);
  CHECK(r.evals.size() == 1);
  CHECK(r.selected_epoch == 1);
  CHECK(fs::exists(d / "manifest.json"));
  CHECK(fs::exists(d / "selected.json"));
  const auto manifest = nlohmann::json::parse(slurp(d / "manifest.json"));
  CHECK(manifest.at("code_version") == kCodeVersion);
  const auto g = load_generator<float>((d / "generator_best.ckpt").string());
  CHECK(g.spec().base_channels == 2);
  std::ifstream eval(d / "eval.csv");
  std::string header;
  std::getline(eval, header);
  CHECK(header == "epoch,step,score_mean,score_std,checkpoint");
}

TEST_CASE("resume reproduces the uninterrupted run") {
  const TrainingConfig c = tiny_config();
  const auto& cs = corpora();
  const fs::path full = fresh_dir("resume_full"), part = fresh_dir("resume_part");
  const auto rf = run_training(c, cs.x, cs.y, full);
  const auto rr = run_training(c, cs.x, cs.y, part, nullptr, full / "checkpoints" / "epoch_001.ckpt");
  // The resumed run reports only the steps it ran.
  REQUIRE(rf.history.size() == 6);
  REQUIRE(rr.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rr.history[i].total == rf.history[3 + i].total);
    CHECK(rr.history[i].cyc == rf.history[3 + i].cyc);
  }
  CHECK(slurp(full / "checkpoints" / "epoch_002.ckpt") == slurp(part / "checkpoints" / "epoch_002.ckpt"));

  // Mid-epoch checkpoint.
  TrainingConfig mid = c;
  mid.checkpoint_every = 2;
  const fs::path m1 = fresh_dir("resume_mid_full"), m2 = fresh_dir("resume_mid_part");
  const auto a = run_training(mid, cs.x, cs.y, m1);
  const auto b = run_training(mid, cs.x, cs.y, m2, nullptr, m1 / "checkpoints" / "step_00000002.ckpt");
  REQUIRE(b.history.size() + 2 == a.history.size());
  for (std::size_t i = 0; i < b.history.size(); ++i) CHECK(b.history[i].total == a.history[2 + i].total);

  TrainingConfig other = c;
  other.base_channels = 3;
  CHECK_THROWS(run_training(other, cs.x, cs.y, fresh_dir("resume_bad"), nullptr,
                            full / "checkpoints" / "epoch_001.ckpt"));
}

TEST_CASE("cycle loss falls on a one-primitive corpus") {
  TrainingConfig c;
  c.epochs = 1;
  c.batch_size = 4;
  c.base_channels = 8;
  c.disc_base_channels = 8;
  c.n_residual_blocks = 2;
  c.max_steps_per_epoch = 200;
  c.seed = 1;
  const auto& cs = corpora();
  auto state = init_training_state<float>(c);
  std::vector<std::size_t> order_x(cs.x.size()), order_y(cs.y.size());
  for (std::size_t i = 0; i < order_x.size(); ++i) order_x[i] = i;
  for (std::size_t i = 0; i < order_y.size(); ++i) order_y[i] = i;
  std::mt19937_64 rng(3);
  std::vector<double> cyc;
  for (std::size_t s = 0; s < 200; ++s) {
    const std::size_t bx = (s * 4) % (order_x.size() - 3), by = (s * 4) % (order_y.size() - 3);
    if (bx == 0) std::shuffle(order_x.begin(), order_x.end(), rng);
    const auto x = make_batch<float>(cs.x, order_x, bx, 4);
    const auto y = make_batch<float>(cs.y, order_y, by, 4);
    cyc.push_back(train_step(state, x, y, c).cyc);
  }
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += cyc[i] / 10;
    last += cyc[190 + i] / 10;
  }
  INFO("cyc first10=" << first << " last10=" << last);
  CHECK(last <= 0.5 * first);
}

TEST_CASE("non-finite losses abort with the step") {
  const TrainingConfig c = tiny_config();
  auto state = init_training_state<double>(c);
  Array<double> bad({2, 1, 32, 32}, 0.0);
  bad[5] = std::nan("");
  const auto y = make_batch<double>(corpora().y, {0, 1}, 0, 2);
  try {
    train_step(state, Tensor<double>::constant(bad), y, c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}
