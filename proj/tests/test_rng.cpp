#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "hvs/rng.hpp"

namespace {

// Known-answer vectors published with Random123 (kat_vectors, philox4x32_10).
TEST(Philox, KnownAnswerZero) {
    const auto out = hvs::philox4x32_10({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = hvs::philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
    const auto out = hvs::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RngStream, SameKeySameSequence) {
    hvs::RngStream a(7, 3), b(7, 3);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsDiffer) {
    std::set<std::uint64_t> firsts;
    for (std::uint64_t s = 0; s < 1000; ++s) firsts.insert(hvs::RngStream(7, s).next_u64());
    EXPECT_EQ(firsts.size(), 1000u);
}

TEST(RngStream, UniformMomentsAndCrossCorrelation) {
    hvs::RngStream a(11, 0), b(11, 1);
    const int M = 200000;
    double sa = 0, saa = 0, sab = 0, sb = 0;
    for (int i = 0; i < M; ++i) {
        const double u = a.uniform();
        const double v = b.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sa += u;
        saa += u * u;
        sb += v;
        sab += u * v;
    }
    const double mean = sa / M;
    EXPECT_NEAR(mean, 0.5, 4 * std::sqrt(1.0 / 12 / M));
    EXPECT_NEAR(saa / M - mean * mean, 1.0 / 12, 2e-3);
    const double cov = sab / M - mean * (sb / M);
    EXPECT_NEAR(cov / (1.0 / 12), 0.0, 4.0 / std::sqrt(M));
}

TEST(RngStream, UniformPosExcludesZero) {
    hvs::RngStream a(1, 1);
    for (int i = 0; i < 10000; ++i) {
        const double u = a.uniform_pos();
        EXPECT_GT(u, 0.0);
        EXPECT_LE(u, 1.0);
    }
}

}  // namespace
