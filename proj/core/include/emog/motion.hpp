#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "emog/skeleton.hpp"

namespace emog {

class Rng;

/// N frames of per-joint axis-angle rotations (radians), stored [N x J x 3].
class GestureSequence {
 public:
  GestureSequence() = default;
  GestureSequence(std::shared_ptr<const SkeletonSpec> skeleton, std::size_t frames, std::vector<double> values,
                  double fps = 15.0);

  std::size_t frame_count() const { return frames_; }
  std::size_t joint_count() const { return skeleton_->joint_count(); }
  std::size_t channels() const { return 3 * joint_count(); }
  double fps() const { return fps_; }
  const SkeletonSpec& skeleton() const { return *skeleton_; }
  const std::shared_ptr<const SkeletonSpec>& skeleton_ptr() const { return skeleton_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> frame(std::size_t n) const;
  double at(std::size_t frame, std::size_t joint, std::size_t axis) const;

  /// Frames [start, start + count) as a new sequence.
  GestureSequence slice(std::size_t start, std::size_t count) const;

  /// Rewrites every joint rotation so its angle is at most pi.
  void canonicalize();

  bool operator==(const GestureSequence& other) const;

 private:
  std::shared_ptr<const SkeletonSpec> skeleton_;
  std::size_t frames_ = 0;
  std::vector<double> values_;
  double fps_ = 15.0;
};

/// Frame-aligned audio features, stored [N x D].
class AudioFeatureSequence {
 public:
  AudioFeatureSequence() = default;
  AudioFeatureSequence(std::size_t frames, std::size_t dims, std::vector<double> values, double source_rate_hz = 15.0);

  std::size_t frame_count() const { return frames_; }
  std::size_t dims() const { return dims_; }
  double source_rate_hz() const { return source_rate_hz_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> frame(std::size_t n) const;
  double at(std::size_t frame, std::size_t dim) const { return values_[frame * dims_ + dim]; }

  AudioFeatureSequence slice(std::size_t start, std::size_t count) const;

  bool operator==(const AudioFeatureSequence&) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> values_;
  double source_rate_hz_ = 15.0;
};

/// Maps an axis-angle vector to the equivalent rotation with angle <= pi.
void canonicalize_axis_angle(std::span<double, 3> r);

/// Per-channel mean and standard deviation (std floored).
struct DatasetStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static constexpr double kStdFloor = 1e-6;

  static DatasetStats compute(std::span<const GestureSequence> sequences);
  std::size_t channels() const { return mean.size(); }
  bool operator==(const DatasetStats&) const = default;
};

GestureSequence normalize(const GestureSequence& seq, const DatasetStats& stats);
GestureSequence denormalize(const GestureSequence& seq, const DatasetStats& stats);
/// In-place variants on raw [frames x channels] buffers.
void normalize_values(std::span<double> values, const DatasetStats& stats);
void denormalize_values(std::span<double> values, const DatasetStats& stats);

/// Window start offsets 0, stride, 2*stride, ... with the trailing remainder
/// dropped. Empty when length < clip.
std::vector<std::size_t> window_offsets(std::size_t length, std::size_t clip, std::size_t stride);

struct WindowResult {
  std::vector<GestureSequence> clips;
  std::vector<std::size_t> offsets;
  bool too_short = false;
};

WindowResult window(const GestureSequence& seq, std::size_t clip = 34, std::size_t stride = 10);

/// Joins clips that share `overlap` frames, crossfading the shared region
/// with weights (i + 1) / (overlap + 1) toward the later clip.
GestureSequence stitch(std::span<const GestureSequence> clips, std::size_t overlap = 4);

enum class MaskPlacement { kSuffix, kScatter };

/// Frame mask with round(ratio * N) frames set (1 = masked); ratio drawn
/// uniformly from [ratio_lo, ratio_hi]. At least one frame stays unmasked.
std::vector<std::uint8_t> random_proportional_mask(std::size_t frames, double ratio_lo, double ratio_hi, Rng& rng,
                                                   MaskPlacement placement = MaskPlacement::kSuffix);

}  // namespace emog
