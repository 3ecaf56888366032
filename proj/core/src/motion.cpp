#include "emog/motion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

GestureSequence::GestureSequence(std::shared_ptr<const SkeletonSpec> skeleton, std::size_t frames,
                                 std::vector<double> values, double fps)
    : skeleton_(std::move(skeleton)), frames_(frames), values_(std::move(values)), fps_(fps) {
  if (!skeleton_) throw ArgumentError("gesture sequence without skeleton");
  if (frames_ == 0) throw ArgumentError("gesture sequence needs at least one frame");
  if (values_.size() != frames_ * channels()) {
    throw DimensionError("gesture sequence expects " + std::to_string(frames_) + "x" +
                         std::to_string(joint_count()) + "x3 values, got " + std::to_string(values_.size()));
  }
  if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw ArgumentError("fps must be positive");
  for (double v : values_) {
    if (!std::isfinite(v)) throw ArgumentError("gesture sequence contains a non-finite value");
  }
}

std::span<const double> GestureSequence::frame(std::size_t n) const {
  return std::span<const double>(values_).subspan(n * channels(), channels());
}

double GestureSequence::at(std::size_t frame, std::size_t joint, std::size_t axis) const {
  return values_[(frame * joint_count() + joint) * 3 + axis];
}

GestureSequence GestureSequence::slice(std::size_t start, std::size_t count) const {
  if (start + count > frames_) throw ArgumentError("slice outside sequence");
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(start * channels()),
                        values_.begin() + static_cast<std::ptrdiff_t>((start + count) * channels()));
  return GestureSequence(skeleton_, count, std::move(v), fps_);
}

void GestureSequence::canonicalize() {
  for (std::size_t i = 0; i + 2 < values_.size(); i += 3) {
    canonicalize_axis_angle(std::span<double, 3>(values_.data() + i, 3));
  }
}

bool GestureSequence::operator==(const GestureSequence& other) const {
  return frames_ == other.frames_ && fps_ == other.fps_ && values_ == other.values_ &&
         (skeleton_ == other.skeleton_ || *skeleton_ == *other.skeleton_);
}

AudioFeatureSequence::AudioFeatureSequence(std::size_t frames, std::size_t dims, std::vector<double> values,
                                           double source_rate_hz)
    : frames_(frames), dims_(dims), values_(std::move(values)), source_rate_hz_(source_rate_hz) {
  if (frames_ == 0 || dims_ == 0) throw ArgumentError("audio features need at least one frame and one dim");
  if (values_.size() != frames_ * dims_) {
    throw DimensionError("audio features expect " + std::to_string(frames_) + "x" + std::to_string(dims_) +
                         " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ArgumentError("audio features contain a non-finite value");
  }
}

std::span<const double> AudioFeatureSequence::frame(std::size_t n) const {
  return std::span<const double>(values_).subspan(n * dims_, dims_);
}

AudioFeatureSequence AudioFeatureSequence::slice(std::size_t start, std::size_t count) const {
  if (start + count > frames_) throw ArgumentError("slice outside audio sequence");
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(start * dims_),
                        values_.begin() + static_cast<std::ptrdiff_t>((start + count) * dims_));
  return AudioFeatureSequence(count, dims_, std::move(v), source_rate_hz_);
}

void canonicalize_axis_angle(std::span<double, 3> r) {
  const double angle = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
  if (angle <= std::numbers::pi) return;
  // Reduce to [0, 2pi), then flip the axis when past pi.
  double reduced = std::fmod(angle, 2.0 * std::numbers::pi);
  double factor = reduced / angle;
  if (reduced > std::numbers::pi) factor = (reduced - 2.0 * std::numbers::pi) / angle;
  for (double& v : r) v *= factor;
}

DatasetStats DatasetStats::compute(std::span<const GestureSequence> sequences) {
  if (sequences.empty()) throw ArgumentError("dataset statistics need at least one sequence");
  const std::size_t ch = sequences.front().channels();
  std::vector<double> mean(ch, 0.0), var(ch, 0.0);
  std::size_t count = 0;
  for (const auto& s : sequences) {
    if (s.channels() != ch) throw ArgumentError("dataset statistics over sequences with differing channel counts");
    for (std::size_t n = 0; n < s.frame_count(); ++n) {
      const auto f = s.frame(n);
      for (std::size_t c = 0; c < ch; ++c) mean[c] += f[c];
    }
    count += s.frame_count();
  }
  for (double& m : mean) m /= static_cast<double>(count);
  for (const auto& s : sequences) {
    for (std::size_t n = 0; n < s.frame_count(); ++n) {
      const auto f = s.frame(n);
      for (std::size_t c = 0; c < ch; ++c) var[c] += (f[c] - mean[c]) * (f[c] - mean[c]);
    }
  }
  DatasetStats stats;
  stats.mean = std::move(mean);
  stats.stddev.resize(ch);
  for (std::size_t c = 0; c < ch; ++c) {
    stats.stddev[c] = std::max(std::sqrt(var[c] / static_cast<double>(count)), kStdFloor);
  }
  return stats;
}

void normalize_values(std::span<double> values, const DatasetStats& stats) {
  const std::size_t ch = stats.channels();
  if (ch == 0 || values.size() % ch != 0) {
    throw ArgumentError("normalize: " + std::to_string(values.size()) + " values do not tile " +
                        std::to_string(ch) + " channels");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = (values[i] - stats.mean[i % ch]) / stats.stddev[i % ch];
  }
}

void denormalize_values(std::span<double> values, const DatasetStats& stats) {
  const std::size_t ch = stats.channels();
  if (ch == 0 || values.size() % ch != 0) {
    throw ArgumentError("denormalize: " + std::to_string(values.size()) + " values do not tile " +
                        std::to_string(ch) + " channels");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = values[i] * stats.stddev[i % ch] + stats.mean[i % ch];
  }
}

GestureSequence normalize(const GestureSequence& seq, const DatasetStats& stats) {
  if (seq.channels() != stats.channels()) {
    throw ArgumentError("normalize: sequence has " + std::to_string(seq.channels()) + " channels, stats have " +
                        std::to_string(stats.channels()));
  }
  std::vector<double> v(seq.values().begin(), seq.values().end());
  normalize_values(v, stats);
  return GestureSequence(seq.skeleton_ptr(), seq.frame_count(), std::move(v), seq.fps());
}

GestureSequence denormalize(const GestureSequence& seq, const DatasetStats& stats) {
  if (seq.channels() != stats.channels()) {
    throw ArgumentError("denormalize: sequence has " + std::to_string(seq.channels()) + " channels, stats have " +
                        std::to_string(stats.channels()));
  }
  std::vector<double> v(seq.values().begin(), seq.values().end());
  denormalize_values(v, stats);
  return GestureSequence(seq.skeleton_ptr(), seq.frame_count(), std::move(v), seq.fps());
}

std::vector<std::size_t> window_offsets(std::size_t length, std::size_t clip, std::size_t stride) {
  if (clip == 0 || stride == 0) throw ArgumentError("window clip length and stride must be positive");
  std::vector<std::size_t> offsets;
  for (std::size_t start = 0; start + clip <= length; start += stride) offsets.push_back(start);
  return offsets;
}

WindowResult window(const GestureSequence& seq, std::size_t clip, std::size_t stride) {
  WindowResult result;
  result.offsets = window_offsets(seq.frame_count(), clip, stride);
  result.too_short = result.offsets.empty();
  for (std::size_t off : result.offsets) result.clips.push_back(seq.slice(off, clip));
  return result;
}

GestureSequence stitch(std::span<const GestureSequence> clips, std::size_t overlap) {
  if (clips.empty()) throw ArgumentError("stitch needs at least one clip");
  const std::size_t ch = clips.front().channels();
  for (const auto& c : clips) {
    if (c.channels() != ch) throw ArgumentError("stitch: clips have differing joint counts");
    if (clips.size() > 1 && overlap >= c.frame_count()) {
      throw ArgumentError("stitch: overlap " + std::to_string(overlap) + " is not shorter than a clip of " +
                          std::to_string(c.frame_count()) + " frames");
    }
  }
  std::vector<double> out(clips.front().values().begin(), clips.front().values().end());
  for (std::size_t k = 1; k < clips.size(); ++k) {
    const auto next = clips[k].values();
    const std::size_t seam = out.size() / ch - overlap;
    for (std::size_t i = 0; i < overlap; ++i) {
      const double w = static_cast<double>(i + 1) / static_cast<double>(overlap + 1);
      for (std::size_t c = 0; c < ch; ++c) {
        double& dst = out[(seam + i) * ch + c];
        dst = (1.0 - w) * dst + w * next[i * ch + c];
      }
    }
    out.insert(out.end(), next.begin() + static_cast<std::ptrdiff_t>(overlap * ch), next.end());
  }
  const std::size_t frames = out.size() / ch;
  return GestureSequence(clips.front().skeleton_ptr(), frames, std::move(out), clips.front().fps());
}

std::vector<std::uint8_t> random_proportional_mask(std::size_t frames, double ratio_lo, double ratio_hi, Rng& rng,
                                                   MaskPlacement placement) {
  if (!(ratio_lo >= 0.0 && ratio_lo <= ratio_hi && ratio_hi < 1.0)) {
    throw ArgumentError("mask ratio range must lie within [0, 1)");
  }
  const double ratio = ratio_lo == ratio_hi ? ratio_lo : rng.uniform(ratio_lo, ratio_hi);
  std::size_t count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(frames)));
  if (frames > 0) count = std::min(count, frames - 1);
  std::vector<std::uint8_t> mask(frames, 0);
  if (placement == MaskPlacement::kSuffix) {
    for (std::size_t i = frames - count; i < frames; ++i) mask[i] = 1;
  } else {
    std::vector<std::size_t> idx(frames);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(idx[i], idx[i + rng.below(frames - i)]);
      mask[idx[i]] = 1;
    }
  }
  return mask;
}

}  // namespace emog
