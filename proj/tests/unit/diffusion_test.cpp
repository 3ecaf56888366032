#include <gtest/gtest.h>

#include <cmath>

#include "emog/diffusion.hpp"
#include "emog/error.hpp"
#include "emog/ops.hpp"
#include "helpers.hpp"

using namespace emog;
using emog::testing::normal_values;
using emog::testing::random_tensor;

namespace {

// Oracle denoiser: the noise that maps the known x0 to the current x_t
// under the forward process.
Denoiser oracle(const std::vector<double>& x0, const NoiseSchedule& s) {
  return [&x0, &s](const Tensor& x_t, std::size_t t) {
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
    std::vector<double> eps(x0.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (x_t[i] - a * x0[i]) / b;
    return Tensor(x_t.shape(), std::move(eps));
  };
}

Denoiser random_linear_denoiser(std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_tensor({channels, channels}, rng, 0.3);
  return [w](const Tensor& x_t, std::size_t t) {
    Tensor lin = linear(x_t, w, Tensor());
    return scale(lin, 1.0 + 0.001 * static_cast<double>(t));
  };
}

}  // namespace

TEST(Schedule, LinearTableAndProduct) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  EXPECT_EQ(s.steps(), 1000u);
  EXPECT_DOUBLE_EQ(s.alpha_bar(0), 1.0);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 1.0 - s.beta(1));
  EXPECT_NEAR(s.beta(1), 1e-4, 1e-18);
  EXPECT_NEAR(s.beta(1000), 0.02, 1e-15);
  double prod = 1.0;
  for (std::size_t t = 1; t <= 1000; ++t) {
    ASSERT_GT(s.beta(t), 0.0);
    ASSERT_LT(s.beta(t), 1.0);
    prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * static_cast<double>(t - 1) / 999.0);
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-14);
    EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
  EXPECT_LT(s.alpha_bar(1000), 1e-4);
}

TEST(Schedule, InvalidRangesRejected) {
  EXPECT_THROW(NoiseSchedule::linear(0, 1e-4, 0.02), ArgumentError);
  EXPECT_THROW(NoiseSchedule::linear(10, 0.0, 0.02), ArgumentError);
  EXPECT_THROW(NoiseSchedule::linear(10, 0.03, 0.02), ArgumentError);
  EXPECT_THROW(NoiseSchedule::linear(10, 1e-4, 1.0), ArgumentError);
  auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
  EXPECT_THROW(s.beta(11), ArgumentError);
  EXPECT_THROW(s.beta(0), ArgumentError);
}

TEST(Schedule, CosineIsMonotone) {
  auto s = NoiseSchedule::cosine(200);
  for (std::size_t t = 1; t <= 200; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  EXPECT_LT(s.alpha_bar(200), 1e-4);
}

TEST(Schedule, SigmaModes) {
  auto s = NoiseSchedule::linear(100, 1e-3, 0.05);
  EXPECT_EQ(s.sigma(1, VarianceMode::kBeta), 0.0);
  EXPECT_EQ(s.sigma(1, VarianceMode::kPosterior), 0.0);
  for (std::size_t t = 2; t <= 100; ++t) {
    EXPECT_GT(s.sigma(t, VarianceMode::kBeta), 0.0);
    EXPECT_EQ(s.sigma(t, VarianceMode::kZero), 0.0);
    EXPECT_LE(s.sigma(t, VarianceMode::kPosterior), s.sigma(t, VarianceMode::kBeta));
  }
}

TEST(QSample, ClosedForm) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(1);
  auto x0 = normal_values(10, rng);
  std::vector<double> zero(10, 0.0);
  auto xt = q_sample(x0, 300, zero, s);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(xt[i], std::sqrt(s.alpha_bar(300)) * x0[i], 1e-15);
  auto eps = normal_values(10, rng);
  auto xT = q_sample(x0, 1000, eps, s);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(xT[i], eps[i], 0.02);
  EXPECT_THROW(q_sample(x0, 0, eps, s), ArgumentError);
  EXPECT_THROW(q_sample(x0, 1001, eps, s), ArgumentError);
  EXPECT_THROW(q_sample(x0, 5, std::vector<double>(9), s), DimensionError);
}

TEST(QSample, UnitVarianceIsPreserved) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(2);
  for (std::size_t t : {1u, 50u, 400u, 1000u}) {
    auto x0 = normal_values(100000, rng);
    auto eps = normal_values(100000, rng);
    auto xt = q_sample(x0, t, eps, s);
    double m = 0, v = 0;
    for (double x : xt) m += x;
    m /= xt.size();
    for (double x : xt) v += (x - m) * (x - m);
    v /= xt.size() - 1;
    EXPECT_NEAR(v, 1.0, 0.03) << "t=" << t;
  }
}

TEST(PredictX0, InvertsQSampleForEveryStep) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(3);
  double worst = 0;
  for (std::size_t t = 1; t <= 1000; ++t) {
    auto x0 = normal_values(8, rng, 2.0);
    auto eps = normal_values(8, rng);
    auto back = predict_x0(q_sample(x0, t, eps, s), eps, t, s);
    for (std::size_t i = 0; i < 8; ++i) worst = std::max(worst, std::abs(back[i] - x0[i]));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(PredictX0, ZeroPredictionAndFloor) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  std::vector<double> xt{1.0, -2.0}, zero(2, 0.0);
  auto x0 = predict_x0(xt, zero, 500, s);
  EXPECT_NEAR(x0[1], -2.0 / std::sqrt(s.alpha_bar(500)), 1e-12);
  auto steep = NoiseSchedule::linear(1000, 0.5, 0.5);  // alpha_bar_T = 2^-1000
  EXPECT_THROW(predict_x0(xt, zero, 1000, steep), NumericError);
}

TEST(ReverseStep, FinalStepIsTheMean) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(4);
  auto xt = normal_values(6, rng), eps = normal_values(6, rng);
  Rng r1(5);
  auto out = reverse_step(xt, 1, eps, s, VarianceMode::kBeta, r1);
  for (std::size_t i = 0; i < 6; ++i) {
    const double mu = (xt[i] - s.beta(1) / std::sqrt(1.0 - s.alpha_bar(1)) * eps[i]) / std::sqrt(s.alpha(1));
    EXPECT_NEAR(out[i], mu, 1e-14);
  }
  EXPECT_EQ(r1.counter(), 0u);
}

TEST(ReverseStep, TinyBetaZeroEpsIsNearIdentity) {
  auto s = NoiseSchedule::linear(10, 1e-10, 1e-10);
  Rng rng(6);
  auto xt = normal_values(5, rng);
  std::vector<double> zero(5, 0.0);
  auto out = reverse_step(xt, 5, zero, s, VarianceMode::kZero, rng);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(out[i], xt[i], 1e-9);
}

TEST(Chain, OracleReconstructsWithoutInjectedNoise) {
  auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Rng rng(7);
  auto x0 = normal_values(2 * 5 * 6, rng);
  Rng chain_rng(8);
  Tensor out = sample(oracle(x0, s), {2, 5, 6}, s, chain_rng, {.variance = VarianceMode::kZero});
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_NEAR(out[i], x0[i], 1e-6);
}

TEST(Chain, InjectedNoiseAccumulatesAsPredicted) {
  // With a fixed noise prediction the chain is affine in the injected noise,
  // so the stochastic and deterministic runs differ by
  // sum_t sigma_t z_t / sqrt(alpha_bar_{t-1}), whose variance is known.
  auto s = NoiseSchedule::linear(200, 5e-4, 0.1);
  const Shape shape{1, 1, 20000};
  Rng rng(9);
  Tensor fixed = random_tensor(shape, rng);
  Denoiser d = [&fixed](const Tensor&, std::size_t) { return fixed; };
  Rng a(10), b(10);
  Tensor noisy = sample(d, shape, s, a, {.variance = VarianceMode::kBeta});
  Tensor clean = sample(d, shape, s, b, {.variance = VarianceMode::kZero});
  double expected = 0;
  for (std::size_t t = 2; t <= 200; ++t) expected += s.beta(t) / s.alpha_bar(t - 1);
  double var = 0;
  for (std::size_t i = 0; i < noisy.numel(); ++i) var += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
  var /= static_cast<double>(noisy.numel());
  EXPECT_NEAR(var / expected, 1.0, 0.05);
}

TEST(Chain, DeterministicReplayAndShapeContract) {
  auto s = NoiseSchedule::linear(50, 1e-3, 0.05);
  auto d = random_linear_denoiser(6, 11);
  for (std::size_t n : {8u, 34u, 150u}) {
    Rng a(12), b(12);
    std::vector<std::vector<double>> traj_a, traj_b;
    Tensor x = sample(d, {1, n, 6}, s, a, {.on_step = [&](std::size_t, std::span<const double> v) {
                                             traj_a.emplace_back(v.begin(), v.end());
                                           }});
    Tensor y = sample(d, {1, n, 6}, s, b, {.on_step = [&](std::size_t, std::span<const double> v) {
                                             traj_b.emplace_back(v.begin(), v.end());
                                           }});
    EXPECT_EQ(x.shape(), (Shape{1, n, 6}));
    EXPECT_EQ(traj_a, traj_b);
    EXPECT_EQ(traj_a.size(), 50u);
    for (double v : x.data()) EXPECT_TRUE(std::isfinite(v));
  }
  Denoiser wrong = [](const Tensor&, std::size_t) { return Tensor::zeros({1, 2}); };
  Rng r(1);
  EXPECT_THROW(sample(wrong, {1, 3, 6}, s, r), DimensionError);
}

TEST(Inpaint, ExtremeMasks) {
  auto s = NoiseSchedule::linear(50, 1e-3, 0.05);
  auto d = random_linear_denoiser(9, 13);
  Rng rng(14);
  Tensor ref = random_tensor({2, 7, 9}, rng);
  {
    Rng a(15), b(15);
    Tensor all = inpaint_sample(d, ref, {true, true, true}, ref.shape(), s, a);
    Tensor plain = sample(d, ref.shape(), s, b);
    for (std::size_t i = 0; i < all.numel(); ++i) EXPECT_EQ(all[i], plain[i]);
  }
  {
    Rng a(16);
    Tensor none = inpaint_sample(d, ref, {false, false, false}, ref.shape(), s, a);
    for (std::size_t i = 0; i < none.numel(); ++i) EXPECT_EQ(none[i], ref[i]);
  }
  Rng a(17);
  EXPECT_THROW(inpaint_sample(d, Tensor(), {false, true, true}, ref.shape(), s, a), ArgumentError);
  EXPECT_NO_THROW(inpaint_sample(d, Tensor(), {true, true, true}, ref.shape(), s, a));
  EXPECT_THROW(inpaint_sample(d, ref, {true, false}, ref.shape(), s, a), DimensionError);
}

TEST(Inpaint, PreservedJointsExactMaskedJointsRegenerated) {
  auto s = NoiseSchedule::linear(50, 1e-3, 0.05);
  auto d = random_linear_denoiser(12, 18);
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor ref = random_tensor({1, 10, 12}, rng);
    std::vector<bool> mask(4);
    for (std::size_t j = 0; j < 4; ++j) mask[j] = rng.uniform() < 0.5;
    mask[trial % 4] = true;
    Rng r(100 + trial);
    Tensor out = inpaint_sample(d, ref, mask, ref.shape(), s, r);
    std::size_t changed = 0, masked_frames = 0;
    for (std::size_t n = 0; n < 10; ++n)
      for (std::size_t j = 0; j < 4; ++j) {
        bool differs = false;
        for (std::size_t a = 0; a < 3; ++a) {
          const std::size_t i = n * 12 + j * 3 + a;
          if (!mask[j]) ASSERT_EQ(out[i], ref[i]);
          differs |= out[i] != ref[i];
        }
        if (mask[j]) {
          ++masked_frames;
          changed += differs;
        }
      }
    EXPECT_EQ(changed, masked_frames);
  }
}

TEST(SeedPose, PinsLeadingFramesAndFallsBackToSample) {
  auto s = NoiseSchedule::linear(50, 1e-3, 0.05);
  auto d = random_linear_denoiser(6, 20);
  Rng rng(21);
  Tensor seed = random_tensor({2, 4, 6}, rng);
  Rng a(22);
  Tensor out = seed_pose_sample(d, seed, {2, 12, 6}, s, a);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(out[(b * 12 + n) * 6 + c], seed[(b * 4 + n) * 6 + c]);

  Rng x(23), y(23);
  Tensor none = seed_pose_sample(d, Tensor::zeros({2, 0, 6}), {2, 12, 6}, s, x);
  Tensor plain = sample(d, {2, 12, 6}, s, y);
  for (std::size_t i = 0; i < none.numel(); ++i) EXPECT_EQ(none[i], plain[i]);

  Rng z(24);
  EXPECT_THROW(seed_pose_sample(d, random_tensor({1, 5, 6}, rng), {1, 4, 6}, s, z), ArgumentError);
}

TEST(Pinned, EmptyPinSetMatchesSample) {
  auto s = NoiseSchedule::linear(30, 1e-3, 0.05);
  auto d = random_linear_denoiser(3, 25);
  Rng rng(26);
  Tensor ref = random_tensor({1, 5, 3}, rng);
  std::vector<std::uint8_t> pins(15, 0);
  Rng a(27), b(27);
  Tensor p = pinned_sample(d, ref, pins, s, a);
  Tensor q = sample(d, ref.shape(), s, b);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(p[i], q[i]);
}
