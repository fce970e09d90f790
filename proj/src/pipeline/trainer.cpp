#include "clade/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "clade/error.hpp"
#include "clade/inference.hpp"
#include "clade/metrics.hpp"

namespace clade {

namespace fs = std::filesystem;

void TrainingConfig::validate() const {
  if (epochs < 1) throw ContractError("config: epochs must be >= 1");
  if (batch_size < 1) throw ContractError("config: batch_size must be >= 1");
  if (!(lr > 0) || !std::isfinite(lr)) throw ContractError("config: lr must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ContractError("config: betas must be in (0,1)");
  if (eval_stride < 1 || eval_stride > kPatchSize) throw ContractError("config: eval_stride must be in [1,32]");
  if (generator_norm != "auto" && generator_norm != "none" && generator_norm != "instance") {
    throw ContractError("config: generator_norm must be auto, none or instance");
  }
  if (precision != "float32" && precision != "float64") throw ContractError("config: precision must be float32|float64");
  weights.validate();
  generator_spec().validate();
  discriminator_spec().validate();
}

GeneratorSpec TrainingConfig::generator_spec() const {
  GeneratorSpec g;
  g.base_channels = base_channels;
  g.n_residual_blocks = n_residual_blocks;
  g.demodulation = demodulation;
  const bool instance = generator_norm == "instance" || (generator_norm == "auto" && !demodulation);
  g.norm = instance ? NormKind::instance : NormKind::none;
  return g;
}

DiscriminatorSpec TrainingConfig::discriminator_spec() const {
  DiscriminatorSpec d;
  d.base_channels = disc_base_channels;
  return d;
}

std::string TrainingConfig::fingerprint() const {
  const GeneratorSpec g = generator_spec();
  if (g.demodulation && g.norm == NormKind::none && weights.lambda_gmap > 0) return "clade";
  if (!g.demodulation && g.norm == NormKind::instance && weights.lambda_gmap == 0) return "conventional_cyclegan";
  return "custom";
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"weights",
           {{"lambda_cyc", weights.lambda_cyc},
            {"lambda_ident", weights.lambda_ident},
            {"lambda_gmap", weights.lambda_gmap}}},
          {"seed", seed},
          {"adversarial_mode", adversarial_mode_name(adversarial_mode)},
          {"demodulation", demodulation},
          {"checkpoint_every", checkpoint_every},
          {"eval_stride", eval_stride},
          {"base_channels", base_channels},
          {"disc_base_channels", disc_base_channels},
          {"n_residual_blocks", n_residual_blocks},
          {"generator_norm", generator_norm},
          {"gmap_form", gmap_form_name(gmap_form)},
          {"eval_volume", eval_volume},
          {"max_steps_per_epoch", max_steps_per_epoch},
          {"precision", precision}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  TrainingConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "weights") {
        for (const auto& [wk, wv] : value.items()) {
          if (wk == "lambda_cyc") c.weights.lambda_cyc = wv.get<double>();
          else if (wk == "lambda_ident") c.weights.lambda_ident = wv.get<double>();
          else if (wk == "lambda_gmap") c.weights.lambda_gmap = wv.get<double>();
          else throw ContractError("config: unknown weight '" + wk + "'");
        }
      } else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "adversarial_mode") c.adversarial_mode = parse_adversarial_mode(value.get<std::string>());
      else if (key == "demodulation") c.demodulation = value.get<bool>();
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<std::size_t>();
      else if (key == "eval_stride") c.eval_stride = value.get<std::size_t>();
      else if (key == "base_channels") c.base_channels = value.get<std::size_t>();
      else if (key == "disc_base_channels") c.disc_base_channels = value.get<std::size_t>();
      else if (key == "n_residual_blocks") c.n_residual_blocks = value.get<std::size_t>();
      else if (key == "generator_norm") c.generator_norm = value.get<std::string>();
      else if (key == "gmap_form") c.gmap_form = parse_gmap_form(value.get<std::string>());
      else if (key == "eval_volume") c.eval_volume = value.get<std::string>();
      else if (key == "max_steps_per_epoch") c.max_steps_per_epoch = value.get<std::size_t>();
      else if (key == "precision") c.precision = value.get<std::string>();
      else throw ContractError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
TrainingRunState<T> init_training_state(const TrainingConfig& config) {
  config.validate();
  // Each network draws from its own stream derived from the run seed.
  std::seed_seq seq{config.seed, std::uint64_t{0x636c616465}};
  std::uint64_t seeds[5];
  {
    std::uint32_t words[10];
    seq.generate(words, words + 10);
    for (int i = 0; i < 5; ++i) seeds[i] = (std::uint64_t{words[2 * i]} << 32) | words[2 * i + 1];
  }
  Generator<T> g_x = build_generator<T>(config.generator_spec(), seeds[0]);
  Generator<T> g_y = build_generator<T>(config.generator_spec(), seeds[1]);
  Discriminator<T> d_x = build_discriminator<T>(config.discriminator_spec(), seeds[2]);
  Discriminator<T> d_y = build_discriminator<T>(config.discriminator_spec(), seeds[3]);
  auto opt = [&](const auto& net) { return make_adam_state<T>(net.params().tensors(), config.lr, config.beta1, config.beta2); };
  TrainingRunState<T> s{0,
                        0,
                        0,
                        std::move(g_x),
                        std::move(g_y),
                        std::move(d_x),
                        std::move(d_y),
                        {},
                        {},
                        {},
                        {},
                        std::mt19937_64(seeds[4]),
                        std::mt19937_64(seeds[4]),
                        {}};
  s.opt_g_x = opt(s.g_x);
  s.opt_g_y = opt(s.g_y);
  s.opt_d_x = opt(s.d_x);
  s.opt_d_y = opt(s.d_y);
  return s;
}

template <typename T>
Tensor<T> make_batch(const PatchSet& set, const std::vector<std::size_t>& indices, std::size_t begin,
                     std::size_t count) {
  if (begin + count > indices.size()) throw ContractError("make_batch: range past the end of the index list");
  const std::size_t px = kPatchSize * kPatchSize;
  Array<T> a({count, 1, kPatchSize, kPatchSize});
  for (std::size_t b = 0; b < count; ++b) {
    const Image& p = set.patches.at(indices[begin + b]);
    if (p.data.size() != px) throw ShapeError("make_batch: patch is not 32x32");
    for (std::size_t i = 0; i < px; ++i) a[b * px + i] = static_cast<T>(p.data[i]);
  }
  return Tensor<T>::constant(std::move(a));
}

namespace {

template <typename T>
Tensor<T> term_or_constant(bool with_graph, const std::function<Tensor<T>()>& make) {
  if (with_graph) return make();
  NoGradGuard guard;
  return Tensor<T>::scalar(make().item());
}

template <typename T>
void zero_all(TrainingRunState<T>& s) {
  s.g_x.params().zero_grad();
  s.g_y.params().zero_grad();
  s.d_x.params().zero_grad();
  s.d_y.params().zero_grad();
}

}  // namespace

template <typename T>
LossBreakdown train_step(TrainingRunState<T>& s, const Tensor<T>& x, const Tensor<T>& y,
                         const TrainingConfig& config) {
  const std::uint64_t step = s.step;
  try {
    // Discriminator phase on detached fakes.
    zero_all(s);
    Tensor<T> fake_y = s.g_x.forward(x);
    Tensor<T> fake_x = s.g_y.forward(y);
    {
      Tensor<T> d_loss = add(
          discriminator_loss(s.d_y.forward(y), s.d_y.forward(fake_y.detach()), config.adversarial_mode),
          discriminator_loss(s.d_x.forward(x), s.d_x.forward(fake_x.detach()), config.adversarial_mode));
      if (!std::isfinite(static_cast<double>(d_loss.item()))) {
        throw NumericError("discriminator loss is not finite");
      }
      backward(d_loss);
      auto dx = s.d_x.params().tensors();
      auto dy = s.d_y.params().tensors();
      adam_step(dx, s.opt_d_x);
      adam_step(dy, s.opt_d_y);
    }

    // Generator phase against the updated discriminators.
    zero_all(s);
    const LossWeights& w = config.weights;
    LossTerms<T> terms;
    terms.adv_forward = generator_adversarial_loss(s.d_y.forward(fake_y), config.adversarial_mode);
    terms.adv_backward = generator_adversarial_loss(s.d_x.forward(fake_x), config.adversarial_mode);
    Tensor<T> x_cyc, y_cyc;
    auto cycled = [&] {
      if (!x_cyc.defined()) {
        x_cyc = s.g_y.forward(fake_y);
        y_cyc = s.g_x.forward(fake_x);
      }
    };
    terms.cyc = term_or_constant<T>(w.lambda_cyc > 0 || w.lambda_gmap > 0, [&] {
      cycled();
      return cycle_loss(x, x_cyc, y, y_cyc);
    });
    Tensor<T> gx_of_y;
    terms.ident = term_or_constant<T>(w.lambda_ident > 0, [&] {
      gx_of_y = s.g_x.forward(y);
      return identity_loss(gx_of_y, y, s.g_y.forward(x), x);
    });
    if (!(w.lambda_ident > 0)) gx_of_y = Tensor<T>();  // built without a graph
    terms.gmap = term_or_constant<T>(w.lambda_gmap > 0, [&] {
      cycled();
      if (config.gmap_form == GmapForm::symmetric) return gradient_mapping_loss(x, x_cyc, y, y_cyc);
      if (!gx_of_y.defined()) gx_of_y = s.g_x.forward(y);
      return gradient_mapping_loss_literal(y, s.g_y.forward(gx_of_y), y_cyc);
    });
    LossBreakdown breakdown;
    Tensor<T> total = total_loss(terms, w, &breakdown);
    backward(total);
    auto gx = s.g_x.params().tensors();
    auto gy = s.g_y.params().tensors();
    adam_step(gx, s.opt_g_x);
    adam_step(gy, s.opt_g_y);
    zero_all(s);

    ++s.step;
    s.history.push_back(breakdown);
    return breakdown;
  } catch (const NumericError& e) {
    // 1-based, matching the step column of losses.csv.
    throw NumericError("step " + std::to_string(step + 1) + ": " + e.what());
  }
}

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw FormatError("checkpoint: corrupt rng state");
  return rng;
}

template <typename T>
void store_adam(Checkpoint& ck, const std::string& prefix, const NetworkParams<T>& params, const AdamState<T>& st) {
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ck.add("adam/" + prefix + "/m/" + entries[i].first, st.m[i]);
    ck.add("adam/" + prefix + "/v/" + entries[i].first, st.v[i]);
  }
  ck.meta["adam"][prefix] = {{"step", st.step}};
}

template <typename T>
void restore_adam(const Checkpoint& ck, const std::string& prefix, const NetworkParams<T>& params,
                  AdamState<T>& st) {
  const auto& entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    st.m[i] = ck.array<T>("adam/" + prefix + "/m/" + entries[i].first);
    st.v[i] = ck.array<T>("adam/" + prefix + "/v/" + entries[i].first);
    if (st.m[i].shape() != entries[i].second.shape() || st.v[i].shape() != entries[i].second.shape()) {
      throw FormatError("checkpoint: optimizer state shape mismatch for " + prefix + "/" + entries[i].first);
    }
  }
  st.step = ck.meta.at("adam").at(prefix).at("step").get<std::uint64_t>();
}

}  // namespace

template <typename T>
Checkpoint make_training_checkpoint(const TrainingRunState<T>& s, const TrainingConfig& config) {
  Checkpoint ck;
  ck.dtype = sizeof(T) == 4 ? DType::float32 : DType::float64;
  ck.meta["kind"] = "training_state";
  ck.meta["config"] = config.to_json();
  ck.meta["fingerprint"] = config.fingerprint();
  ck.meta["epoch"] = s.epoch;
  ck.meta["step_in_epoch"] = s.step_in_epoch;
  ck.meta["step"] = s.step;
  ck.meta["rng"] = rng_to_string(s.rng);
  ck.meta["epoch_rng"] = rng_to_string(s.epoch_rng);
  ck.meta["architecture"]["G_X"] = to_json(s.g_x.spec());
  ck.meta["architecture"]["G_Y"] = to_json(s.g_y.spec());
  ck.meta["architecture"]["D_X"] = to_json(s.d_x.spec());
  ck.meta["architecture"]["D_Y"] = to_json(s.d_y.spec());
  store_params(ck, "G_X", s.g_x.params());
  store_params(ck, "G_Y", s.g_y.params());
  store_params(ck, "D_X", s.d_x.params());
  store_params(ck, "D_Y", s.d_y.params());
  store_adam(ck, "G_X", s.g_x.params(), s.opt_g_x);
  store_adam(ck, "G_Y", s.g_y.params(), s.opt_g_y);
  store_adam(ck, "D_X", s.d_x.params(), s.opt_d_x);
  store_adam(ck, "D_Y", s.d_y.params(), s.opt_d_y);
  return ck;
}

template <typename T>
TrainingRunState<T> restore_training_state(const Checkpoint& ck, const TrainingConfig& config) {
  if (ck.meta.value("kind", "") != "training_state") throw FormatError("checkpoint is not a training state");
  TrainingRunState<T> s = init_training_state<T>(config);
  try {
    if (ck.meta.at("architecture").at("G_X") != to_json(s.g_x.spec()) ||
        ck.meta.at("architecture").at("D_X") != to_json(s.d_x.spec())) {
      throw FormatError("checkpoint architecture does not match the config");
    }
    restore_params(ck, "G_X", s.g_x.params());
    restore_params(ck, "G_Y", s.g_y.params());
    restore_params(ck, "D_X", s.d_x.params());
    restore_params(ck, "D_Y", s.d_y.params());
    restore_adam(ck, "G_X", s.g_x.params(), s.opt_g_x);
    restore_adam(ck, "G_Y", s.g_y.params(), s.opt_g_y);
    restore_adam(ck, "D_X", s.d_x.params(), s.opt_d_x);
    restore_adam(ck, "D_Y", s.d_y.params(), s.opt_d_y);
    s.epoch = ck.meta.at("epoch").get<std::size_t>();
    s.step_in_epoch = ck.meta.at("step_in_epoch").get<std::size_t>();
    s.step = ck.meta.at("step").get<std::uint64_t>();
    s.rng = rng_from_string(ck.meta.at("rng").get<std::string>());
    s.epoch_rng = rng_from_string(ck.meta.at("epoch_rng").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint meta: ") + e.what());
  }
  return s;
}

std::size_t select_epoch(const std::vector<double>& scores) {
  if (scores.empty()) throw ContractError("select_epoch: no scores");
  return static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin()) + 1;
}

namespace {

std::string padded(std::size_t v, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) { write_file_bytes(path, text); }

// Keeps the header and the rows whose first column is <= last_kept.
std::string truncate_csv(const fs::path& path, const std::string& header, std::uint64_t last_kept) {
  std::string out = header + "\n";
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) <= last_kept) out += line + "\n";
  }
  return out;
}

template <typename T>
EpochEval evaluate(const Generator<T>& g, const TrainingConfig& config, const PatchSet& x,
                   const Volume3D* eval_volume) {
  EpochEval e;
  const PatchMapper mapper = generator_mapper(g);
  std::vector<double> scores;
  if (eval_volume) {
    InferenceOptions opt;
    opt.stride = config.eval_stride;
    const Volume3D out = super_resolve_volume(*eval_volume, mapper, opt);
    double lo = out.intensity_range[0], hi = out.intensity_range[1];
    if (!(hi > lo)) hi = lo + 1.0;
    const NrVolumeScore s = nr_score_volume(out, Plane::lr_primary, lo, hi);
    e.score_mean = s.mean;
    e.score_std = s.stddev;
    return e;
  }
  const std::size_t n = std::min<std::size_t>(64, x.size());
  std::vector<Image> probes(x.patches.begin(), x.patches.begin() + static_cast<std::ptrdiff_t>(n));
  for (Image im : mapper(probes)) {
    for (double& v : im.data) v = 0.5 * (v + 1.0);
    scores.push_back(nr_score(im));
  }
  double sum = 0, ss = 0;
  for (double v : scores) sum += v;
  e.score_mean = sum / static_cast<double>(scores.size());
  for (double v : scores) ss += (v - e.score_mean) * (v - e.score_mean);
  e.score_std = std::sqrt(ss / static_cast<double>(scores.size()));
  return e;
}

template <typename T>
TrainingResult run_training_impl(const TrainingConfig& config, const PatchSet& x, const PatchSet& y,
                                 const fs::path& run_dir, const Volume3D* eval_volume,
                                 const std::optional<fs::path>& resume_from, const TrainingHooks& hooks) {
  config.validate();
  if (x.size() == 0 || y.size() == 0) throw ContractError("training corpora must both be nonempty");
  std::size_t steps_per_epoch = std::min(x.size(), y.size()) / config.batch_size;
  if (config.max_steps_per_epoch > 0) steps_per_epoch = std::min(steps_per_epoch, config.max_steps_per_epoch);
  if (steps_per_epoch == 0) throw ContractError("corpus smaller than one batch");

  fs::create_directories(run_dir / "checkpoints");
  const std::string eval_header = "epoch,step,score_mean,score_std,checkpoint";
  TrainingResult result;

  TrainingRunState<T> s = resume_from ? restore_training_state<T>(Checkpoint::load(*resume_from), config)
                                      : init_training_state<T>(config);
  std::string loss_csv, eval_csv;
  if (resume_from) {
    loss_csv = truncate_csv(run_dir / "losses.csv", loss_csv_header(), s.step);
    eval_csv = truncate_csv(run_dir / "eval.csv", eval_header, s.epoch);
    std::istringstream rows(eval_csv);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
      std::istringstream f(line);
      std::string cell;
      EpochEval e;
      std::getline(f, cell, ',');
      e.epoch = std::stoul(cell);
      std::getline(f, cell, ',');
      e.step = std::stoull(cell);
      std::getline(f, cell, ',');
      e.score_mean = std::stod(cell);
      std::getline(f, cell, ',');
      e.score_std = std::stod(cell);
      std::getline(f, e.checkpoint, ',');
      result.evals.push_back(e);
    }
  } else {
    loss_csv = loss_csv_header() + "\n";
    eval_csv = eval_header + "\n";
  }

  nlohmann::json manifest = {{"config", config.to_json()},
                             {"fingerprint", config.fingerprint()},
                             {"code_version", kCodeVersion},
                             {"corpus", {{"x", x.size()}, {"y", y.size()}}},
                             {"steps_per_epoch", steps_per_epoch}};
  write_text(run_dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<std::size_t> order_x(x.size()), order_y(y.size());
  while (s.epoch < config.epochs) {
    if (s.step_in_epoch == 0) s.epoch_rng = s.rng;
    // Shuffle from the epoch-start state so a mid-epoch resume sees the
    // same order.
    std::mt19937_64 shuffler = s.epoch_rng;
    for (std::size_t i = 0; i < order_x.size(); ++i) order_x[i] = i;
    for (std::size_t i = 0; i < order_y.size(); ++i) order_y[i] = i;
    std::shuffle(order_x.begin(), order_x.end(), shuffler);
    std::shuffle(order_y.begin(), order_y.end(), shuffler);
    s.rng = shuffler;

    for (; s.step_in_epoch < steps_per_epoch;) {
      const std::size_t b0 = s.step_in_epoch * config.batch_size;
      const Tensor<T> bx = make_batch<T>(x, order_x, b0, config.batch_size);
      const Tensor<T> by = make_batch<T>(y, order_y, b0, config.batch_size);
      const LossBreakdown b = train_step(s, bx, by, config);
      ++s.step_in_epoch;
      loss_csv += loss_csv_row(s.step, b) + "\n";
      if (hooks.on_step) hooks.on_step(s.step, b);
      if (config.checkpoint_every > 0 && s.step % config.checkpoint_every == 0 && s.step_in_epoch < steps_per_epoch) {
        make_training_checkpoint(s, config).save(run_dir / "checkpoints" / ("step_" + padded(s.step, 8) + ".ckpt"));
        write_text(run_dir / "losses.csv", loss_csv);
      }
    }
    ++s.epoch;
    s.step_in_epoch = 0;

    const fs::path ckpt = run_dir / "checkpoints" / ("epoch_" + padded(s.epoch, 3) + ".ckpt");
    make_training_checkpoint(s, config).save(ckpt);
    EpochEval e = evaluate(s.g_x, config, x, eval_volume);
    e.epoch = s.epoch;
    e.step = s.step;
    e.checkpoint = fs::relative(ckpt, run_dir).generic_string();
    result.evals.push_back(e);
    std::ostringstream row;
    row.precision(9);
    row << e.epoch << ',' << e.step << ',' << e.score_mean << ',' << e.score_std << ',' << e.checkpoint << "\n";
    eval_csv += row.str();
    write_text(run_dir / "losses.csv", loss_csv);
    write_text(run_dir / "eval.csv", eval_csv);
    if (hooks.on_epoch) hooks.on_epoch(e);
  }

  std::vector<double> scores;
  for (const auto& e : result.evals) scores.push_back(e.score_mean);
  result.selected_epoch = result.evals.at(select_epoch(scores) - 1).epoch;
  const EpochEval& chosen = result.evals.at(select_epoch(scores) - 1);
  result.selected_checkpoint = run_dir / chosen.checkpoint;
  write_text(run_dir / "selected.json", nlohmann::json{{"epoch", chosen.epoch},
                                                       {"checkpoint", chosen.checkpoint},
                                                       {"score_mean", chosen.score_mean},
                                                       {"score_std", chosen.score_std}}
                                                .dump(2) +
                                            "\n");
  save_generator(load_generator<T>(result.selected_checkpoint.string(), "G_X"),
                 (run_dir / "generator_best.ckpt").string());
  result.history = s.history;
  return result;
}

}  // namespace

TrainingResult run_training(const TrainingConfig& config, const PatchSet& x, const PatchSet& y,
                            const fs::path& run_dir, const Volume3D* eval_volume,
                            const std::optional<fs::path>& resume_from, const TrainingHooks& hooks) {
  if (config.precision == "float64") {
    return run_training_impl<double>(config, x, y, run_dir, eval_volume, resume_from, hooks);
  }
  return run_training_impl<float>(config, x, y, run_dir, eval_volume, resume_from, hooks);
}

#define CLADE_INSTANTIATE_TRAINER(T)                                                                          \
  template TrainingRunState<T> init_training_state<T>(const TrainingConfig&);                                 \
  template Tensor<T> make_batch<T>(const PatchSet&, const std::vector<std::size_t>&, std::size_t, std::size_t); \
  template LossBreakdown train_step<T>(TrainingRunState<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                       const TrainingConfig&);                                                 \
  template Checkpoint make_training_checkpoint<T>(const TrainingRunState<T>&, const TrainingConfig&);         \
  template TrainingRunState<T> restore_training_state<T>(const Checkpoint&, const TrainingConfig&);

CLADE_INSTANTIATE_TRAINER(float)
CLADE_INSTANTIATE_TRAINER(double)

}  // namespace clade
