#include <gtest/gtest.h>

#include <cmath>

#include "emog/error.hpp"
#include "emog/gradcheck.hpp"
#include "emog/nn.hpp"
#include "helpers.hpp"

using namespace emog;
using emog::testing::probe;
using emog::testing::random_tensor;

namespace {

void randomize(ParameterSet& params, Rng& rng, double scale) {
  for (auto& p : params.items())
    for (auto& v : p.tensor.mutable_data()) v = scale * rng.normal();
}

}  // namespace

TEST(Linear, ZeroInitAndShapes) {
  ParameterSet params;
  Rng rng(1);
  Linear l = Linear::create(params, "l", 5, 3, rng, true, true);
  Tensor y = l(random_tensor({2, 4, 5}, rng));
  EXPECT_EQ(y.shape(), (Shape{2, 4, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(params.total_size(), 5u * 3u + 3u);
}

TEST(Linear, FanInInitBounds) {
  ParameterSet params;
  Rng rng(2);
  Linear l = Linear::create(params, "l", 64, 8, rng);
  const double bound = 1.0 / 8.0;
  for (double v : l.weight.data()) EXPECT_LE(std::abs(v), bound);
  for (double v : l.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(AdaLN, StartsAsIdentity) {
  ParameterSet params;
  Rng rng(3);
  AdaLNHead head = AdaLNHead::create(params, "n", 6, 4, rng);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Tensor c = random_tensor({2, 6}, rng);
  Tensor y = head.modulate(x, c);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(AdaLN, ModulationIsUniformOverFrames) {
  ParameterSet params;
  Rng rng(4);
  AdaLNHead head = AdaLNHead::create(params, "n", 3, 2, rng);
  randomize(params, rng, 0.5);
  Tensor x = Tensor::full({1, 5, 2}, 1.0);
  Tensor y = head.modulate(x, random_tensor({1, 3}, rng));
  for (std::size_t n = 1; n < 5; ++n)
    for (std::size_t f = 0; f < 2; ++f) EXPECT_DOUBLE_EQ(y[n * 2 + f], y[f]);
}

TEST(MultiHeadAttention, HeadsMustDivideWidth) {
  ParameterSet params;
  Rng rng(5);
  EXPECT_THROW(MultiHeadAttention::create(params, "a", 10, 10, 3, rng), ConfigError);
}

TEST(MultiHeadAttention, MaskedContextIsIgnored) {
  ParameterSet params;
  Rng rng(6);
  auto mha = MultiHeadAttention::create(params, "a", 4, 6, 2, rng);
  Tensor x = random_tensor({1, 2, 4}, rng);
  std::vector<double> ctx = emog::testing::normal_values(3 * 6, rng);
  const std::vector<std::uint8_t> valid{1, 0, 1};
  Tensor y1 = mha(x, Tensor({1, 3, 6}, ctx), valid);
  for (std::size_t d = 0; d < 6; ++d) ctx[6 + d] += 10.0;
  Tensor y2 = mha(x, Tensor({1, 3, 6}, ctx), valid);
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_DOUBLE_EQ(y1[i], y2[i]);
}

TEST(TransformerBlock, GradientsMatchFiniteDifferences) {
  ParameterSet params;
  Rng rng(7);
  auto block = TransformerBlock::create(params, "b", 4, 2, 2, 3, Activation::kGelu, rng);
  randomize(params, rng, 0.3);
  Tensor x = params.add("x", {2, 3, 4});
  for (auto& v : x.mutable_data()) v = rng.normal();
  Tensor c = params.add("c", {2, 3});
  for (auto& v : c.mutable_data()) v = rng.normal();
  const std::vector<std::uint8_t> valid{1, 1, 0, 1, 1, 1};
  auto report = finite_diff_check([&] { return probe(block(x, c, valid)); }, params, {.tolerance = 1e-4});
  for (const auto& e : report.entries) EXPECT_TRUE(e.passed) << e.name << " " << e.max_rel_error;
}

TEST(TransformerBlock, SiluVariantRuns) {
  ParameterSet params;
  Rng rng(8);
  auto block = TransformerBlock::create(params, "b", 4, 1, 2, 3, Activation::kSilu, rng);
  Tensor y = block(random_tensor({1, 2, 4}, rng), random_tensor({1, 3}, rng));
  EXPECT_EQ(y.shape(), (Shape{1, 2, 4}));
}

TEST(Sinusoid, TableValues) {
  Tensor t = sinusoidal_table(3, 4);
  // position 2: sin(2), cos(2), sin(2 / 100), cos(2 / 100)
  EXPECT_NEAR(t[8], std::sin(2.0), 1e-15);
  EXPECT_NEAR(t[9], std::cos(2.0), 1e-15);
  EXPECT_NEAR(t[10], std::sin(0.02), 1e-15);
  EXPECT_NEAR(t[11], std::cos(0.02), 1e-15);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_NEAR(t[f], f % 2 == 0 ? 0.0 : 1.0, 1e-15);
}

TEST(Sinusoid, EmbeddingMatchesTableRows) {
  Tensor t = sinusoidal_table(10, 6);
  const std::vector<double> pos{3.0, 7.0};
  Tensor e = sinusoidal_embedding(pos, 6);
  for (std::size_t f = 0; f < 6; ++f) {
    EXPECT_NEAR(e[f], t[3 * 6 + f], 1e-14);
    EXPECT_NEAR(e[6 + f], t[7 * 6 + f], 1e-14);
  }
}
