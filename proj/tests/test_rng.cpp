#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kolmo/rng.hpp"
#include "kolmo/stats.hpp"

namespace kolmo {
namespace {

// Known-answer vectors published with Random123 (philox4x32_10).
TEST(Philox, KnownAnswerVectors) {
  auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  r = Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(r, (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  r = Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(r, (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, SameSeedAndStreamReproduceBitExactly) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(RngStream, SeekRestartsAtBlock) {
  RngStream a(3, 1);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 10; ++i) first.push_back(a.next_u64());
  a.seek(0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), first[i]);
}

TEST(RngStream, DistinctStreamsAreUncorrelated) {
  const std::size_t m = 200000;
  RngStream a(11, 1), b(11, 2);
  double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = a.normal(), y = b.normal();
    sx += x, sy += y, sxy += x * y, sxx += x * x, syy += y * y;
  }
  const double n = static_cast<double>(m);
  const double corr = (sxy / n - sx * sy / n / n) /
                      std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(n));
}

TEST(RngStream, SubstreamsDifferFromParent) {
  RngStream root(5, 9);
  RngStream c0 = root.substream(0), c1 = root.substream(1);
  EXPECT_NE(c0.stream_id(), c1.stream_id());
  EXPECT_NE(c0.stream_id(), root.stream_id());
  EXPECT_EQ(c0.seed(), root.seed());
}

TEST(RngStream, UniformAndNormalMoments) {
  RngStream rng(1, 0);
  RunningStats u, z, z2;
  for (int i = 0; i < 400000; ++i) {
    const double x = rng.uniform();
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
    u.add(x);
    const double g = rng.normal();
    z.add(g);
    z2.add(g * g);
  }
  EXPECT_NEAR(u.mean(), 0.5, 4.0 * u.std_error());
  EXPECT_NEAR(u.variance(), 1.0 / 12.0, 1e-3);
  EXPECT_NEAR(z.mean(), 0.0, 4.0 * z.std_error());
  EXPECT_NEAR(z2.mean(), 1.0, 4.0 * z2.std_error());
}

TEST(RngStream, BelowStaysInRange) {
  RngStream rng(2, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts.at(rng.below(7));
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

}  // namespace
}  // namespace kolmo
