#include <gtest/gtest.h>

#include <cmath>

#include "qct/rng.hpp"

using namespace qct;

// Known-answer vectors published with the reference Philox4x32-10.
TEST(Philox, KnownAnswers) {
  auto r = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x6627e8d5u);
  EXPECT_EQ(r[1], 0xe169c58du);
  EXPECT_EQ(r[2], 0xbc57ac4cu);
  EXPECT_EQ(r[3], 0x9b00dbd8u);
  r = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r[0], 0x408f276du);
  EXPECT_EQ(r[1], 0x41c83b0eu);
  EXPECT_EQ(r[2], 0xa20bc7c6u);
  EXPECT_EQ(r[3], 0x6d5451fdu);
  r = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r[0], 0xd16cfe09u);
  EXPECT_EQ(r[1], 0x94fdccebu);
  EXPECT_EQ(r[2], 0x5001e420u);
  EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(NoiseStream, CounterAddressable) {
  const NoiseStream a(42, Stream::Ensemble, 7), b(42, Stream::Ensemble, 7);
  EXPECT_EQ(a.normal(123), b.normal(123));
  EXPECT_NE(a.normal(123), NoiseStream(42, Stream::Lyapunov, 7).normal(123));
  EXPECT_NE(a.normal(123), NoiseStream(43, Stream::Ensemble, 7).normal(123));
  EXPECT_NE(a.normal(123), NoiseStream(42, Stream::Ensemble, 8).normal(123));
}

TEST(NoiseStream, UniformsInOpenInterval) {
  const NoiseStream a(1, Stream::Sampling, 0);
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const auto u = a.uniform_pair(k);
    EXPECT_GT(u[0], 0.0);
    EXPECT_LT(u[0], 1.0);
    EXPECT_GT(u[1], 0.0);
    EXPECT_LT(u[1], 1.0);
  }
}

TEST(NoiseStream, NormalMoments) {
  const NoiseStream a(9, Stream::Ensemble, 3);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int k = 0; k < n; ++k) {
    const double z = a.normal(static_cast<std::uint64_t>(k));
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5 / std::sqrt(double(n)));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}
