#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "emog/error.hpp"
#include "emog/motion.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"
#include "helpers.hpp"

using namespace emog;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const SkeletonSpec> chain(std::size_t j) { return std::make_shared<SkeletonSpec>(SkeletonSpec::chain(j)); }

GestureSequence random_motion(std::size_t frames, std::size_t joints, Rng& rng) {
  return GestureSequence(chain(joints), frames, emog::testing::normal_values(frames * joints * 3, rng));
}

GestureSequence constant_motion(std::size_t frames, std::size_t joints, double v) {
  return GestureSequence(chain(joints), frames, std::vector<double>(frames * joints * 3, v));
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("emog_motion_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Skeleton, UpperBodyHas47JointsAndThreeGroups) {
  auto s = SkeletonSpec::upper_body();
  EXPECT_EQ(s.joint_count(), 47u);
  std::size_t covered = s.group("body").size() + s.group("left_hand").size() + s.group("right_hand").size();
  EXPECT_EQ(covered, 47u);
  EXPECT_EQ(s.group("all").size(), 47u);
  EXPECT_EQ(s.group("body").size(), 9u);
  for (std::size_t j = 0; j < s.joint_count(); ++j) EXPECT_LT(s.parents()[j], static_cast<int>(j));
}

TEST(Skeleton, RejectsDuplicatesAndBadParents) {
  EXPECT_THROW(SkeletonSpec({"a", "a"}, {-1, 0}), ArgumentError);
  EXPECT_THROW(SkeletonSpec({"a", "b"}, {-1, 1}), ArgumentError);
  EXPECT_THROW(SkeletonSpec({"a", ""}, {-1, 0}), ArgumentError);
  EXPECT_NO_THROW(SkeletonSpec({"a", "b", "c"}, {-1, -1, 0}));
}

TEST(GestureSequence, RejectsEmptyAndMismatchedData) {
  EXPECT_THROW(GestureSequence(chain(2), 0, {}), ArgumentError);
  EXPECT_THROW(GestureSequence(chain(2), 2, std::vector<double>(11, 0.0)), ArgumentError);
  std::vector<double> v(6, 0.0);
  v[3] = std::nan("");
  EXPECT_THROW(GestureSequence(chain(2), 1, v), ArgumentError);
}

TEST(GestureSequence, CanonicalizeBoundsAngleAndPreservesRotation) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 3> r{rng.normal() * 4, rng.normal() * 4, rng.normal() * 4};
    const double angle = std::hypot(r[0], r[1], r[2]);
    std::array<double, 3> c = r;
    canonicalize_axis_angle(c);
    const double ca = std::hypot(c[0], c[1], c[2]);
    EXPECT_LE(ca, std::numbers::pi + 1e-12);
    for (double x : c) EXPECT_LE(std::abs(x), std::numbers::pi + 1e-12);
    // Same rotation: angle differs by a multiple of 2 pi along +-axis. Check
    // that rotating a test vector gives the same result (Rodrigues).
    auto rotate = [](const std::array<double, 3>& w, const std::array<double, 3>& v) {
      const double th = std::hypot(w[0], w[1], w[2]);
      if (th < 1e-15) return v;
      const std::array<double, 3> k{w[0] / th, w[1] / th, w[2] / th};
      const double kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
      const std::array<double, 3> kxv{k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]};
      std::array<double, 3> out{};
      for (int i = 0; i < 3; ++i)
        out[i] = v[i] * std::cos(th) + kxv[i] * std::sin(th) + k[i] * kv * (1 - std::cos(th));
      return out;
    };
    const std::array<double, 3> v{0.3, -1.1, 0.7};
    auto a = rotate(r, v), b = rotate(c, v);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-9) << "angle " << angle;
  }
}

TEST(Window, ClipCounts) {
  auto m34 = constant_motion(34, 2, 0.0);
  EXPECT_EQ(window(m34).clips.size(), 1u);
  auto m54 = constant_motion(54, 2, 0.0);
  auto w = window(m54, 34, 10);
  EXPECT_EQ(w.offsets, (std::vector<std::size_t>{0, 10, 20}));
  EXPECT_EQ(w.clips.size(), 3u);  // floor((54 - 34) / 10) + 1
  auto m33 = window(constant_motion(33, 2, 0.0));
  EXPECT_TRUE(m33.clips.empty());
  EXPECT_TRUE(m33.too_short);
}

TEST(Window, ClipsReproduceSourceFrames) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 10 + rng.below(60), clip = 1 + rng.below(10), stride = 1 + rng.below(7);
    auto m = random_motion(len, 3, rng);
    auto w = window(m, clip, stride);
    EXPECT_EQ(w.clips.size(), len < clip ? 0 : (len - clip) / stride + 1);
    for (std::size_t k = 0; k < w.clips.size(); ++k) {
      EXPECT_EQ(w.offsets[k], k * stride);
      for (std::size_t n = 0; n < clip; ++n) {
        auto a = w.clips[k].frame(n), b = m.frame(w.offsets[k] + n);
        ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
      }
    }
  }
}

TEST(Stitch, SingleClipUnchangedAndConstantsStayConstant) {
  auto a = constant_motion(10, 2, 0.7);
  std::vector<GestureSequence> one{a};
  EXPECT_EQ(stitch(one, 4), a);
  std::vector<GestureSequence> two{a, a};
  auto s = stitch(two, 4);
  EXPECT_EQ(s.frame_count(), 16u);
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Stitch, CrossfadeWeightsAtTheSeam) {
  std::vector<GestureSequence> clips{constant_motion(8, 1, 0.0), constant_motion(8, 1, 1.0)};
  auto s = stitch(clips, 4);
  ASSERT_EQ(s.frame_count(), 12u);
  const double expected[] = {0.2, 0.4, 0.6, 0.8};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.at(4 + i, 0, 0), expected[i], 1e-15);
  EXPECT_EQ(s.at(3, 0, 0), 0.0);
  EXPECT_EQ(s.at(8, 0, 0), 1.0);
}

TEST(Stitch, LengthAndOverlapErrors) {
  Rng rng(3);
  std::vector<GestureSequence> clips{random_motion(10, 2, rng), random_motion(7, 2, rng), random_motion(9, 2, rng)};
  EXPECT_EQ(stitch(clips, 3).frame_count(), 10u + 7u + 9u - 3u * 2u);
  EXPECT_THROW(stitch(clips, 7), ArgumentError);
}

TEST(Stitch, SeamJumpBoundedBySourceDeltasPlusGap) {
  // Property: at the seam, the inter-frame delta never exceeds the largest
  // delta inside either source clip plus the value gap spread over the
  // crossfade.
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 12, ov = 1 + rng.below(5);
    auto a = random_motion(len, 1, rng);
    auto b = random_motion(len, 1, rng);
    std::vector<GestureSequence> clips{a, b};
    auto s = stitch(clips, ov);
    auto max_delta = [](const GestureSequence& m, std::size_t from, std::size_t to) {
      double d = 0;
      for (std::size_t n = from + 1; n < to; ++n)
        for (std::size_t c = 0; c < m.channels(); ++c)
          d = std::max(d, std::abs(m.values()[n * m.channels() + c] - m.values()[(n - 1) * m.channels() + c]));
      return d;
    };
    double gap = 0;
    for (std::size_t i = 0; i < ov; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        gap = std::max(gap, std::abs(a.values()[(len - ov + i) * 3 + c] - b.values()[i * 3 + c]));
    const double bound = std::max(max_delta(a, 0, len), max_delta(b, 0, len)) + gap;
    EXPECT_LE(max_delta(s, len - ov - 1, len + 1), bound + 1e-12);
  }
}

TEST(Normalize, RoundTripAndStats) {
  Rng rng(5);
  std::vector<GestureSequence> seqs;
  for (int i = 0; i < 6; ++i) {
    auto m = random_motion(20, 2, rng);
    for (auto& v : m.values()) v = 3.0 * v + 1.5;
    seqs.push_back(m);
  }
  auto stats = DatasetStats::compute(seqs);
  for (const auto& m : seqs) {
    auto back = denormalize(normalize(m, stats), stats);
    for (std::size_t i = 0; i < m.values().size(); ++i) EXPECT_NEAR(back.values()[i], m.values()[i], 1e-12);
  }
  std::vector<GestureSequence> normed;
  for (const auto& m : seqs) normed.push_back(normalize(m, stats));
  auto again = DatasetStats::compute(normed);
  for (std::size_t c = 0; c < again.channels(); ++c) {
    EXPECT_NEAR(again.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(again.stddev[c], 1.0, 1e-9);
  }
  GestureSequence at_mean(chain(2), 1, stats.mean);
  const auto zeroed = normalize(at_mean, stats);
  for (double v : zeroed.values()) EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_THROW(normalize(random_motion(3, 3, rng), stats), ArgumentError);
}

TEST(Normalize, StdIsFlooredForConstantChannels) {
  std::vector<GestureSequence> seqs{constant_motion(5, 1, 2.0)};
  auto stats = DatasetStats::compute(seqs);
  for (double s : stats.stddev) EXPECT_GE(s, DatasetStats::kStdFloor);
}

TEST(Mask, CountsAndDeterminism) {
  Rng rng(6);
  auto none = random_proportional_mask(34, 0.0, 0.0, rng);
  EXPECT_EQ(std::count(none.begin(), none.end(), 1), 0);
  auto half = random_proportional_mask(34, 0.5, 0.5, rng);
  EXPECT_EQ(std::count(half.begin(), half.end(), 1), 17);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_EQ(half[i], 0);  // suffix placement
  Rng a(7), b(7);
  EXPECT_EQ(random_proportional_mask(50, 0.1, 0.9, a, MaskPlacement::kScatter),
            random_proportional_mask(50, 0.1, 0.9, b, MaskPlacement::kScatter));
  auto scatter = random_proportional_mask(40, 0.25, 0.25, rng, MaskPlacement::kScatter);
  EXPECT_EQ(std::count(scatter.begin(), scatter.end(), 1), 10);
  EXPECT_THROW(random_proportional_mask(10, 0.2, 1.0, rng), ArgumentError);
}

TEST(MotionIo, RoundTripIsLossless) {
  Rng rng(8);
  auto dir = temp_dir("roundtrip");
  auto m = GestureSequence(std::make_shared<SkeletonSpec>(SkeletonSpec::upper_body()), 5,
                           emog::testing::normal_values(5 * 47 * 3, rng), 30.0);
  m.values()[0] = 1.0 / 3.0;
  m.values()[1] = -0.0;
  save_motion(m, dir / "a.motion");
  auto back = load_motion(dir / "a.motion");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.fps(), 30.0);
  EXPECT_EQ(back.skeleton(), m.skeleton());
  EXPECT_TRUE(std::signbit(back.values()[1]));

  AudioFeatureSequence audio(4, 3, emog::testing::normal_values(12, rng), 16000.0);
  save_audio(audio, dir / "a.audio");
  EXPECT_EQ(load_audio(dir / "a.audio"), audio);
}

TEST(MotionIo, MalformedFilesReportOffsets) {
  Rng rng(9);
  auto dir = temp_dir("malformed");
  auto m = random_motion(3, 2, rng);
  save_motion(m, dir / "ok.motion");
  std::string bytes = read_file(dir / "ok.motion");

  // Header claims more joints than the data holds.
  std::string bad = bytes;
  bad.replace(bad.find("joints 2"), 8, "joints 3");
  write_file(dir / "bad.motion", bad);
  EXPECT_THROW(load_motion(dir / "bad.motion"), ParseError);

  write_file(dir / "trunc.motion", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_motion(dir / "trunc.motion"), ParseError);

  std::string version = bytes;
  version.replace(0, 13, "EMOG-MOTION 9");
  write_file(dir / "ver.motion", version);
  try {
    load_motion(dir / "ver.motion");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_LT(e.offset(), 20u);
  }

  std::string empty = bytes;
  empty.replace(empty.find("frames 3"), 8, "frames 0");
  write_file(dir / "empty.motion", empty);
  EXPECT_THROW(load_motion(dir / "empty.motion"), ParseError);

  EXPECT_THROW(load_motion(dir / "missing.motion"), IoError);
}

TEST(MotionIo, CsvExportHasOneRowPerFrame) {
  Rng rng(10);
  auto dir = temp_dir("csv");
  auto m = random_motion(6, 2, rng);
  export_motion_csv(m, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "joint_0_x,joint_0_y,joint_0_z,joint_1_x,joint_1_y,joint_1_z");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    if (rows == 1) {
      EXPECT_EQ(std::stod(line.substr(0, line.find(','))), m.at(0, 0, 0));
    }
  }
  EXPECT_EQ(rows, 6u);
}

TEST(MotionIo, AudioCsvImport) {
  auto dir = temp_dir("audio_csv");
  write_file(dir / "a.csv", "f0,f1\n1,2\n3,4.5\n-1,0\n");
  auto a = import_audio_csv(dir / "a.csv", 30.0);
  EXPECT_EQ(a.frame_count(), 3u);
  EXPECT_EQ(a.dims(), 2u);
  EXPECT_EQ(a.at(1, 1), 4.5);
  EXPECT_EQ(a.source_rate_hz(), 30.0);
  write_file(dir / "b.csv", "1,2\n3\n");
  EXPECT_THROW(import_audio_csv(dir / "b.csv", 30.0), ParseError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}
