#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "spinglass/philox.hpp"

using namespace spinglass;

// Published known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswerVectors) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, StreamsAreReproducible) {
  PhiloxStream a(42, StreamTag::test, 3);
  PhiloxStream b(42, StreamTag::test, 3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Philox, TagsAndIdsSeparateStreams) {
  PhiloxStream a(42, StreamTag::test, 3);
  PhiloxStream b(42, StreamTag::scratch, 3);
  PhiloxStream c(42, StreamTag::test, 4);
  PhiloxStream d(43, StreamTag::test, 3);
  const double x = a.uniform();
  EXPECT_NE(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_NE(x, d.uniform());
}

TEST(Philox, KeyedNormalIsPure) {
  EXPECT_EQ(keyed_normal(9, StreamTag::disorder, 2, 123456789012ull),
            keyed_normal(9, StreamTag::disorder, 2, 123456789012ull));
  EXPECT_NE(keyed_normal(9, StreamTag::disorder, 2, 5), keyed_normal(9, StreamTag::disorder, 3, 5));
  EXPECT_NE(keyed_normal(9, StreamTag::disorder, 2, 5), keyed_normal(9, StreamTag::test, 2, 5));
}

TEST(Philox, UniformsInOpenInterval) {
  PhiloxStream s(1, StreamTag::test, 0);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
}

TEST(Philox, NormalMoments) {
  PhiloxStream s(5, StreamTag::test, 1);
  const int n = 400000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  m1 /= n, m2 /= n, m3 /= n, m4 /= n;
  // Five standard errors of each sample moment.
  EXPECT_NEAR(m1, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(m2, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m3, 0.0, 5 * std::sqrt(15.0 / n));
  EXPECT_NEAR(m4, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(Philox, KeyedNormalTailFrequency) {
  // P(|Z| > 2) = 0.0455003.
  const int n = 200000;
  int tail = 0;
  for (int i = 0; i < n; ++i) tail += std::abs(keyed_normal(11, StreamTag::test, 0, static_cast<std::uint64_t>(i))) > 2.0;
  const double p = 0.0455003;
  EXPECT_NEAR(static_cast<double>(tail) / n, p, 5 * std::sqrt(p * (1 - p) / n));
}
