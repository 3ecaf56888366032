#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "emog/rng.hpp"

using emog::Rng;

TEST(Rng, SameKeySameStream) {
  Rng a(17), b(17);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, CounterPositionsTheStream) {
  Rng a(5);
  for (int i = 0; i < 13; ++i) a.next_u64();
  Rng b(5, a.counter());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(3);
  Rng before = a;
  Rng child = a.split(4);
  EXPECT_EQ(a.counter(), before.counter());
  EXPECT_NE(child.key(), a.key());
  EXPECT_NE(a.split(4).next_u64(), a.split(5).next_u64());
  EXPECT_EQ(a.split(4).next_u64(), child.next_u64());
}

TEST(Rng, UniformRangeAndMoments) {
  Rng r(1);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng r(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    auto k = r.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, Mix64Scatters) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(emog::mix64(i));
  EXPECT_EQ(seen.size(), 1000u);
}
