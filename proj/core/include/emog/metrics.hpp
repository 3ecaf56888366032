#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emog/motion.hpp"
#include "emog/nn.hpp"
#include "emog/optim.hpp"

namespace emog {

/// Row-major sample matrix: `rows` vectors of length `dim`.
struct SampleMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void append(std::span<const double> v);
};

struct ExtractorConfig {
  std::size_t clip_length = 34;
  std::size_t hidden = 256;
  std::size_t latent = 32;
  std::size_t steps = 1500;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double target_mse = 0.1;  // held-out reconstruction MSE, normalized units
  std::uint64_t seed = 11;

  bool operator==(const ExtractorConfig&) const = default;
};

struct ExtractorReport {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  bool converged = false;
};

/// Autoencoder over frame-flattened clips; only the encoder is used for
/// distances. Inputs are normalized with statistics of its training clips.
class GestureFeatureExtractor {
 public:
  /// `clips` are raw [clip_length x C] motions. The last tenth (at least one
  /// clip) is held out to measure reconstruction error.
  static GestureFeatureExtractor train(std::span<const GestureSequence> clips, const ExtractorConfig& config,
                                       ExtractorReport* report = nullptr);

  std::vector<double> encode(const GestureSequence& clip) const;
  SampleMatrix encode_all(std::span<const GestureSequence> clips) const;
  /// Mean squared reconstruction error in normalized units.
  double reconstruction_mse(std::span<const GestureSequence> clips) const;

  std::size_t latent_dim() const { return config_.latent; }
  std::size_t clip_length() const { return config_.clip_length; }
  const DatasetStats& stats() const { return stats_; }

 private:
  Tensor input_tensor(std::span<const GestureSequence> clips) const;
  Tensor encode_tensor(const Tensor& x) const;
  Tensor decode_tensor(const Tensor& z) const;

  ExtractorConfig config_;
  DatasetStats stats_;
  std::size_t channels_ = 0;
  ParameterSet params_;
  Linear enc1_, enc2_, dec1_, dec2_;
};

struct GaussianStats {
  std::vector<double> mean;
  std::vector<double> cov;  // [dim x dim], unbiased
  std::size_t dim = 0;

  static GaussianStats fit(const SampleMatrix& samples);
};

/// Squared Frechet distance between two Gaussians.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);
/// Frechet distance between Gaussian fits of two latent sets.
double fgd(const SampleMatrix& real, const SampleMatrix& generated);

/// Weighted fraction of (frame, joint) pairs whose 3-vector distance is at
/// most `delta`. Weights are per frame and rescaled to mean 1; empty means
/// uniform.
double srgr(const GestureSequence& real, const GestureSequence& generated, std::span<const double> weights,
            double delta = 0.2);

enum class BeatSource { kKinematic, kAudio };

struct BeatSet {
  std::vector<double> times;  // seconds, strictly increasing
  BeatSource source = BeatSource::kKinematic;
};

struct KinematicBeatOptions {
  /// Minimum prominence relative to the clip's peak speed.
  double min_prominence = 0.1;
  /// Frames searched on each side when measuring prominence.
  std::size_t window = 3;
  /// An endpoint counts only if its speed is below this fraction of the peak.
  double endpoint_ratio = 0.3;
  double speed_floor = 1e-9;

  bool operator==(const KinematicBeatOptions&) const = default;
};

struct AudioBeatOptions {
  std::size_t channel = 0;
  double threshold = 0.5;

  bool operator==(const AudioBeatOptions&) const = default;
};

/// Mean over joints of the rotation-vector speed, central differences
/// (one-sided at the ends), per frame.
std::vector<double> joint_speed(const GestureSequence& motion);
std::vector<std::size_t> kinematic_beat_frames(const GestureSequence& motion, const KinematicBeatOptions& options = {});
BeatSet kinematic_beats(const GestureSequence& motion, const KinematicBeatOptions& options = {});
std::vector<std::size_t> audio_beat_frames(const AudioFeatureSequence& audio, const AudioBeatOptions& options = {});
/// Frame indices become seconds via `fps`.
BeatSet audio_beats(const AudioFeatureSequence& audio, double fps, const AudioBeatOptions& options = {});

/// Mean over kinematic beats of exp(-d^2 / (2 sigma^2)), d the distance to
/// the nearest audio beat. Throws MetricError if either set is empty.
double beat_align(const BeatSet& kinematic, const BeatSet& audio, double sigma = 0.3);

struct ClassifierConfig {
  std::size_t steps = 400;
  double lr = 0.05;
};

/// Softmax regression on per-channel time mean and standard deviation of a
/// motion. Used to judge whether generated gestures carry an emotion.
class GestureEmotionClassifier {
 public:
  static GestureEmotionClassifier train(std::span<const GestureSequence> motions, std::span<const int> labels,
                                        std::size_t classes, const ClassifierConfig& config = {});
  int predict(const GestureSequence& motion) const;
  double accuracy(std::span<const GestureSequence> motions, std::span<const int> labels) const;

 private:
  std::vector<double> features(const GestureSequence& motion) const;

  std::size_t classes_ = 0;
  std::vector<double> feature_mean_;
  std::vector<double> feature_std_;
  std::vector<double> weight_;  // [F x C]
  std::vector<double> bias_;    // [C]
};

struct MetricsConfig {
  ExtractorConfig extractor;
  double srgr_delta = 0.2;
  double beat_sigma = 0.3;
  KinematicBeatOptions kinematic;
  AudioBeatOptions audio;
  std::size_t repetitions = 10;
  std::uint64_t seed = 2024;

  bool operator==(const MetricsConfig&) const = default;
};

struct MetricValue {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MetricsReport {
  std::string label;
  std::vector<double> fgd;         // per repetition
  std::vector<double> srgr;
  std::vector<double> beat_align;
  std::size_t undefined_beat_align = 0;  // clips skipped for lack of beats

  static MetricValue summarize(std::span<const double> values);
  std::string text() const;
  std::string csv() const;
};

}  // namespace emog
