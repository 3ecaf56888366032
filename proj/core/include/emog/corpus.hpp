#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "emog/motion.hpp"

namespace emog {

/// Knobs of the procedural corpus. Per-emotion tables are derived from
/// `seed` (see CorpusTables) unless given explicitly.
struct CorpusConfig {
  std::size_t emotion_count = 8;
  std::size_t speaker_count = 4;
  std::size_t clip_length = 34;
  double fps = 15.0;
  std::size_t audio_dim = 32;
  std::size_t emotion_block = 16;  // audio channels carrying the emotion code
  double beat_period_min = 6.0;    // frames
  double beat_period_max = 12.0;
  double beat_jitter = 0.1;        // relative jitter of each beat interval
  double amplitude_min = 0.15;     // radians, per-emotion stroke amplitude range
  double amplitude_max = 0.5;
  double posture_scale = 0.3;      // radians, per-emotion posture offsets
  double speaker_scale = 0.05;     // radians, per-speaker posture offsets
  double emotion_noise = 0.05;     // noise on the emotion-coded audio block
  double filler_noise = 0.05;      // noise on unused audio channels
  double motion_noise = 0.0;
  std::size_t joints = 47;         // 47 uses the upper-body skeleton, else a chain
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const CorpusConfig&) const = default;
};

/// Fixed per-corpus mapping from labels to motion/audio structure.
struct CorpusTables {
  std::vector<double> amplitude;                   // [C]
  std::vector<double> period;                      // [C] frames
  std::vector<std::vector<double>> posture;        // [C][J*3]
  std::vector<std::vector<double>> speaker_offset; // [S][J*3]
  std::vector<double> speaker_gain;                // [S]
  std::vector<double> stroke_weights;              // [J*3]
  std::vector<std::vector<double>> emotion_code;   // [C][emotion_block], entries +-1
  std::vector<double> speaker_code;                // [S]

  static CorpusTables derive(const CorpusConfig& config);
};

// Audio channel layout.
inline constexpr std::size_t kOnsetChannel = 0;      // sharp beat envelope
inline constexpr std::size_t kWideOnsetChannel = 1;  // wide beat envelope
inline constexpr std::size_t kPhaseCosChannel = 2;
inline constexpr std::size_t kPhaseSinChannel = 3;
inline constexpr std::size_t kEmotionBlockStart = 4;

struct CorpusSample {
  std::size_t id = 0;
  AudioFeatureSequence audio;
  GestureSequence motion;
  int emotion = 0;
  int speaker = 0;
  std::vector<std::size_t> beat_frames;
  std::uint64_t seed = 0;
};

/// Deterministic in (config, emotion, speaker, seed).
///
/// Motion: posture[emotion] + speaker offset + a stroke per beat interval,
///   amplitude[emotion] * gain[speaker] * w * s_k * cos(pi * u),
/// where u in [0, 1) is the phase inside the interval and s_k alternates sign
/// each beat, so joint speed vanishes exactly at beats.
/// Audio: beat envelopes and stroke phase, the emotion code plus noise, a
/// speaker code channel, and filler noise.
CorpusSample generate_sample(const CorpusConfig& config, int emotion, int speaker, std::uint64_t seed);
CorpusSample generate_sample(const CorpusConfig& config, const CorpusTables& tables,
                             const std::shared_ptr<const SkeletonSpec>& skeleton, int emotion, int speaker,
                             std::uint64_t seed);

std::shared_ptr<const SkeletonSpec> corpus_skeleton(const CorpusConfig& config);

struct Corpus {
  CorpusConfig config;
  std::vector<CorpusSample> train;
  std::vector<CorpusSample> validation;
  std::vector<CorpusSample> test;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

/// Stratified over emotions and speakers; 80/10/10 split within each emotion.
Corpus generate_corpus(const CorpusConfig& config, std::size_t sample_count);

/// Writes manifest.json plus samples/<id>.{motion,audio,json}.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace emog
