#include <gtest/gtest.h>

#include <cmath>

#include "dtfl/rng.hpp"

using dtfl::Rng;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsAreIndependentOfEachOther) {
    Rng root(7);
    Rng a = root.substream("partition");
    Rng b = root.substream("channel");
    // consuming one stream must not disturb the other
    Rng a2 = root.substream("partition");
    for (int i = 0; i < 50; ++i) b.next_u64();
    for (int i = 0; i < 50; ++i) EXPECT_EQ(a.next_u64(), a2.next_u64());
}

TEST(Rng, SubstreamIndexMatters) {
    Rng root(7);
    EXPECT_NE(root.substream("sim", 0).next_u64(), root.substream("sim", 1).next_u64());
}

TEST(Rng, UniformBounds) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(2.0, 5.0);
        EXPECT_GE(u, 2.0);
        EXPECT_LE(u, 5.0);
    }
}

TEST(Rng, UniformRejectsInvertedRange) {
    Rng rng(3);
    EXPECT_THROW(rng.uniform(1.0, 0.0), dtfl::BadRange);
}

TEST(Rng, BelowIsInRange) {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(Rng, NormalMoments) {
    Rng rng(5);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(Rng, PoissonMean) {
    Rng rng(9);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rng.poisson(3.0);
    EXPECT_NEAR(sum / n, 3.0, 0.05);
    EXPECT_EQ(rng.poisson(0.0), 0);
    EXPECT_EQ(rng.poisson(-1.0), 0);
}
