#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emog/corpus.hpp"
#include "emog/diffusion.hpp"
#include "emog/jcformer.hpp"
#include "emog/motion.hpp"
#include "emog/optim.hpp"

namespace emog {

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t steps = 2000;
  double lr = 1e-4;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  std::size_t warmup_steps = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm, 0 = off
  std::size_t clip_length = 34;
  std::size_t clip_stride = 10;
  bool variable_length = false;
  std::size_t vl_window = 150;
  std::size_t vl_stride = 50;
  double mask_ratio_min = 0.0;
  double mask_ratio_max = 0.5;
  MaskPlacement mask_placement = MaskPlacement::kSuffix;
  double lambda_rec = 1.0;
  bool use_rec = true;
  std::size_t checkpoint_every = 500;  // 0 = final checkpoint only
  std::uint64_t seed = 1234;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& name);
std::string to_string(MaskPlacement p);
MaskPlacement parse_mask_placement(const std::string& name);

struct LossWeights {
  double lambda_rec = 1.0;
  bool use_rec = true;
  bool use_ce = true;
};

/// Mean squared error over valid frames. Throws ArgumentError when every
/// frame is masked.
Tensor loss_mse(const Tensor& eps, const Tensor& eps_hat, std::span<const std::uint8_t> valid = {});
/// Mean over valid frames of the per-frame L2 norm of x0 - x0_hat.
Tensor loss_rec(const Tensor& x0, const Tensor& x0_hat, std::span<const std::uint8_t> valid = {});
Tensor loss_ce(const Tensor& logits, std::span<const int> labels);
/// mse + lambda_rec * rec + ce, dropping disabled terms. Undefined parts are
/// treated as disabled. Throws TrainingError on a non-finite part.
Tensor total_loss(const Tensor& mse, const Tensor& rec, const Tensor& ce, const LossWeights& weights);

/// Differentiable x0 estimate from eps_hat, one timestep per batch item.
Tensor predict_x0_batch(const Tensor& x_t, const Tensor& eps_hat, std::span<const std::size_t> steps,
                        const NoiseSchedule& schedule);

/// Fixed-length training windows, motion normalized.
struct TrainingClip {
  std::vector<double> motion;  // [frames x 3J]
  std::vector<double> audio;   // [frames x D]
  int emotion = 0;
  int speaker = 0;
};

struct TrainingSet {
  std::vector<TrainingClip> clips;
  std::size_t frames = 0;
  std::size_t channels = 0;
  std::size_t audio_dim = 0;
};

/// Windows every sample (clip_length/stride, or vl_window/vl_stride in
/// variable-length mode, capped at the shortest sample) and normalizes.
TrainingSet make_training_set(std::span<const CorpusSample> samples, const DatasetStats& stats,
                              const TrainConfig& config);

struct LossRecord {
  std::size_t step = 0;
  double mse = 0.0;
  double rec = 0.0;
  double ce = 0.0;
  double total = 0.0;
  bool operator==(const LossRecord&) const = default;
};

std::string loss_log_csv(std::span<const LossRecord> log);

class Trainer {
 public:
  Trainer(JCFormer& model, NoiseSchedule schedule, TrainConfig config, TrainingSet data);

  /// Runs step `steps_done() + 1`. Batch, timesteps, noise and masks come from
  /// a stream keyed by (seed, step), so a resumed run replays exactly.
  LossRecord step();
  /// Runs until `steps_done() == target`, calling `on_step` after each step.
  void run(std::size_t target, const std::function<void(const LossRecord&)>& on_step = {});

  std::size_t steps_done() const { return steps_done_; }
  const std::vector<LossRecord>& log() const { return log_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  const TrainConfig& config() const { return config_; }
  const JCFormer& model() const { return model_; }

  /// Restores progress from a checkpoint.
  void restore(std::size_t steps_done, std::vector<LossRecord> log);

  double learning_rate(std::size_t step) const;

 private:
  JCFormer& model_;
  NoiseSchedule schedule_;
  TrainConfig config_;
  TrainingSet data_;
  Adam adam_;
  std::size_t steps_done_ = 0;
  std::vector<LossRecord> log_;
};

struct ValidationSnapshot {
  double mse = 0.0;
  double rec = 0.0;
  double emotion_accuracy = 0.0;  // predicted label vs ground truth
  bool has_emotion = false;
  std::size_t clips = 0;
};

/// Losses at seeded random timesteps and emotion-head accuracy over a
/// held-out set, without gradients.
ValidationSnapshot evaluate_validation(const JCFormer& model, const NoiseSchedule& schedule, const TrainingSet& set,
                                       std::uint64_t seed);

/// Moving average of a series with the given window (trailing, shrinking at
/// the start).
std::vector<double> smooth(std::span<const double> values, std::size_t window);

}  // namespace emog
