#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "clade/adam.hpp"
#include "clade/losses.hpp"
#include "clade/net.hpp"
#include "clade/patchwork.hpp"

namespace clade {

inline constexpr const char* kCodeVersion = "clade-0.1.0";

struct TrainingConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights{};
  std::uint64_t seed = 0;
  AdversarialMode adversarial_mode = AdversarialMode::bce_logits;
  bool demodulation = true;
  // Extra mid-epoch checkpoint every N steps; 0 writes epoch checkpoints only.
  std::size_t checkpoint_every = 0;
  std::size_t eval_stride = 12;
  std::size_t base_channels = 64;
  std::size_t disc_base_channels = 64;
  std::size_t n_residual_blocks = 6;
  // "auto" picks instance norm exactly when demodulation is off.
  std::string generator_norm = "auto";
  GmapForm gmap_form = GmapForm::symmetric;
  std::string eval_volume;  // LR volume scored after every epoch
  std::size_t max_steps_per_epoch = 0;  // 0 = one pass over the smaller corpus
  std::string precision = "float32";

  void validate() const;
  GeneratorSpec generator_spec() const;
  DiscriminatorSpec discriminator_spec() const;
  // "clade", "conventional_cyclegan" (no demodulation, instance norm, no
  // gradient mapping) or "custom".
  std::string fingerprint() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainingConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct TrainingRunState {
  std::size_t epoch = 0;          // completed epochs
  std::size_t step_in_epoch = 0;  // steps done in the current epoch
  std::uint64_t step = 0;         // global step counter
  Generator<T> g_x;               // X (low-res) -> Y (high-res)
  Generator<T> g_y;               // Y -> X
  Discriminator<T> d_x;
  Discriminator<T> d_y;
  AdamState<T> opt_g_x, opt_g_y, opt_d_x, opt_d_y;
  std::mt19937_64 rng;
  // Generator state at the start of the current epoch; reshuffling from it
  // reproduces the epoch's batch order on resume.
  std::mt19937_64 epoch_rng;
  std::vector<LossBreakdown> history;
};

template <typename T>
TrainingRunState<T> init_training_state(const TrainingConfig& config);

// Stacks the listed patches into a [B,1,32,32] tensor.
template <typename T>
Tensor<T> make_batch(const PatchSet& set, const std::vector<std::size_t>& indices, std::size_t begin,
                     std::size_t count);

// One discriminator update on real vs detached fakes, then one generator
// update on the full objective. Throws NumericError naming the term and step.
template <typename T>
LossBreakdown train_step(TrainingRunState<T>& state, const Tensor<T>& x, const Tensor<T>& y,
                         const TrainingConfig& config);

template <typename T>
Checkpoint make_training_checkpoint(const TrainingRunState<T>& state, const TrainingConfig& config);
template <typename T>
TrainingRunState<T> restore_training_state(const Checkpoint& ck, const TrainingConfig& config);

struct EpochEval {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double score_mean = 0;
  double score_std = 0;
  std::string checkpoint;
};

// 1-based index of the lowest score (first on ties).
std::size_t select_epoch(const std::vector<double>& scores);

struct TrainingResult {
  std::vector<EpochEval> evals;
  std::size_t selected_epoch = 0;
  std::filesystem::path selected_checkpoint;
  std::vector<LossBreakdown> history;
};

struct TrainingHooks {
  std::function<void(std::uint64_t step, const LossBreakdown&)> on_step;
  std::function<void(const EpochEval&)> on_epoch;
};

// Writes into run_dir: manifest.json, losses.csv, eval.csv, checkpoints/
// epoch_NNN.ckpt (plus step_NNNNNNNN.ckpt when checkpoint_every > 0),
// selected.json and generator_best.ckpt (standalone G_X of the chosen epoch).
// After each epoch the G_X output on eval_volume (stride eval_stride) is
// scored with nr_score; without an eval volume the score is taken over
// G_X outputs of up to 64 X patches. With resume_from, training continues
// from that checkpoint and rewrites the CSVs from that point on.
TrainingResult run_training(const TrainingConfig& config, const PatchSet& x, const PatchSet& y,
                            const std::filesystem::path& run_dir, const Volume3D* eval_volume = nullptr,
                            const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                            const TrainingHooks& hooks = {});

}  // namespace clade
