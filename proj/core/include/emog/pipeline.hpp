#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emog/config.hpp"
#include "emog/corpus.hpp"
#include "emog/diffusion.hpp"
#include "emog/jcformer.hpp"
#include "emog/metrics.hpp"
#include "emog/motion.hpp"
#include "emog/training.hpp"

namespace emog {

/// Parses a joint mask: "none", "all", a group name ("body", "left_hand",
/// "right_hand") or joint names, comma-separated. true = regenerate.
std::vector<bool> parse_joint_mask(const SkeletonSpec& skeleton, const std::string& spec);

struct GenerateOptions {
  int speaker = 0;
  std::optional<int> emotion;  // overrides the predicted label
  std::optional<GestureSequence> seed_pose;  // first frames are pinned
  std::uint64_t seed = 0;
  std::size_t window = 34;
  std::size_t overlap = 4;
};

struct EditOptions {
  int speaker = 0;
  std::optional<int> emotion;
  std::uint64_t seed = 0;
  std::size_t window = 34;
  std::size_t overlap = 4;
};

/// Sampling front end for a trained model: aligns audio, normalizes, runs the
/// reverse chain window by window and returns raw-unit motion.
class Generator {
 public:
  Generator(const JCFormer& model, DatasetStats stats, ScheduleConfig schedule,
            std::shared_ptr<const SkeletonSpec> skeleton, double fps = 15.0);

  /// Frames of motion covering the audio's duration.
  std::size_t frames_for(const AudioFeatureSequence& audio) const;
  /// Audio resampled to `frames_for(audio)` rows when its rate differs.
  AudioFeatureSequence align(const AudioFeatureSequence& audio) const;

  /// One reverse chain over a batch of equal-length clips whose audio is
  /// already at the motion rate. `emotions` empty = predicted labels. When
  /// `seeds` is given, each item's first seed frames are pinned.
  std::vector<GestureSequence> generate_clips(std::span<const AudioFeatureSequence> audio,
                                              std::span<const int> speakers, std::span<const int> emotions, Rng& rng,
                                              std::span<const GestureSequence> seeds = {}) const;

  /// Arbitrary-length generation: overlapping windows, each continuing from
  /// the previous one's last `overlap` frames, stitched.
  GestureSequence generate(const AudioFeatureSequence& audio, const GenerateOptions& options) const;

  /// Regenerates the joints flagged in `joint_mask`; all other joints equal
  /// `reference` exactly.
  GestureSequence edit(const GestureSequence& reference, const std::vector<bool>& joint_mask,
                       const AudioFeatureSequence& audio, const EditOptions& options) const;

  const JCFormer& model() const { return model_; }
  const DatasetStats& stats() const { return stats_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  VarianceMode variance() const { return variance_; }

 private:
  Denoiser make_denoiser(const Tensor& audio, std::vector<int> speakers, std::vector<int> emotions) const;
  GestureSequence windowed(const AudioFeatureSequence& audio, int speaker, std::optional<int> emotion,
                           std::uint64_t seed, std::size_t window, std::size_t overlap,
                           const GestureSequence* seed_pose, const GestureSequence* reference,
                           const std::vector<bool>* joint_mask) const;

  const JCFormer& model_;
  DatasetStats stats_;
  NoiseSchedule schedule_;
  VarianceMode variance_;
  std::shared_ptr<const SkeletonSpec> skeleton_;
  double fps_;
};

/// Fixed-length real clips used for feature extraction (first `length`
/// frames of every sample at least that long).
std::vector<GestureSequence> feature_clips(std::span<const CorpusSample> samples, std::size_t length);

/// Metrics of generated motion against the test split, repeated with
/// distinct seeds derived from `config.seed`.
MetricsReport evaluate_model(const Generator& generator, std::span<const CorpusSample> test,
                             const GestureFeatureExtractor& extractor, const MetricsConfig& config,
                             std::size_t repetitions, const std::string& label = "model");

/// The same metrics with the real test motion standing in for generated.
MetricsReport evaluate_real(std::span<const CorpusSample> test, const GestureFeatureExtractor& extractor,
                            const MetricsConfig& config, const std::string& label = "real");

struct ExperimentSpec {
  std::string name;
  ModelConfig model;
  TrainConfig training;
};

struct ExperimentResult {
  std::string name;
  std::vector<LossRecord> log;
  MetricsReport report;
};

struct HarnessOptions {
  std::size_t train_steps = 0;   // 0 = training.steps from the config
  std::size_t repetitions = 0;   // 0 = metrics.repetitions from the config
  std::size_t test_limit = 0;    // 0 = whole test split
};

/// The four emotion conditioning variants, identical otherwise.
std::vector<ExperimentSpec> mode_experiments(const RunConfig& base);
/// Full model, then without L_rec, without the spatial branch, without emotion.
std::vector<ExperimentSpec> ablation_experiments(const RunConfig& base);

/// Trains and evaluates each spec under the same seeds with one shared
/// feature extractor.
std::vector<ExperimentResult> run_experiments(const RunConfig& base, const Corpus& corpus,
                                              std::span<const ExperimentSpec> specs, const HarnessOptions& options,
                                              const std::function<void(const std::string&)>& progress = {});

std::string experiments_report(std::span<const ExperimentResult> results);
std::string experiments_csv(std::span<const ExperimentResult> results);

/// One SVG stick figure per keyframe (frontal XY projection of forward
/// kinematics with unit bones). Returns the written paths.
std::vector<std::filesystem::path> export_svg_frames(const GestureSequence& motion, std::size_t keyframes,
                                                     const std::filesystem::path& dir);
/// Joint positions from rotations, unit-length bones along +Y of each
/// parent frame; [N x J x 3].
std::vector<double> forward_kinematics(const GestureSequence& motion);

/// CSV of latent vectors, one row per window of `extractor.clip_length()`
/// frames (stride = clip length).
std::string latents_csv(const GestureSequence& motion, const GestureFeatureExtractor& extractor);

}  // namespace emog
