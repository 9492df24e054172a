#include "qprop/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace qprop;

// Known-answer vectors generated with numpy.random.Philox (4x64, 10 rounds).
// numpy advances the counter before producing a block, so its raw output at
// user counter c equals the block function evaluated at c + 1.
TEST(Philox, KnownAnswerVectors) {
    {
        const auto out = philox4x64({1, 0, 0, 0}, 0, 0);
        EXPECT_EQ(out[0], 0x02f4ba6408e4d89bULL);
        EXPECT_EQ(out[1], 0x3dd62b0b9ca8c5b2ULL);
        EXPECT_EQ(out[2], 0x1c8667a55d902e79ULL);
        EXPECT_EQ(out[3], 0x907d7a052fd5b4dcULL);
    }
    {
        const auto out = philox4x64({2, 2, 3, 4}, 0x243F6A8885A308D3ULL, 0x13198A2E03707344ULL);
        EXPECT_EQ(out[0], 0x5d2406e9b0e77f60ULL);
        EXPECT_EQ(out[1], 0xf0ec6e0c16437102ULL);
        EXPECT_EQ(out[2], 0x9e3103552b514809ULL);
        EXPECT_EQ(out[3], 0x0e39b8091e5dc4d4ULL);
    }
    {
        const auto out = philox4x64({1, 0, 0, 0}, 0xDEADBEEFULL, 0);
        EXPECT_EQ(out[0], 0xa4e930dc738acaf1ULL);
        EXPECT_EQ(out[1], 0xb1c7ecc6484e9cf0ULL);
    }
    {
        const auto out = philox4x64({123456790, 0, 0, 0}, 2024, 7);
        EXPECT_EQ(out[0], 0xb6cb631220b293d2ULL);
        EXPECT_EQ(out[3], 0x13a5ec041beabb40ULL);
    }
}

TEST(InverseNormalCdf, RoundTripsThroughErfc) {
    // Newton-polished erfc inversion as the oracle.
    const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const auto pdf = [](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
    };
    for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
        double x = inverse_normal_cdf(p);
        // One Newton step should barely move a correct inverse.
        const double step = (cdf(x) - p) / pdf(x);
        EXPECT_LT(std::abs(step), 1e-9 * std::max(1.0, std::abs(x))) << p;
    }
    EXPECT_NEAR(inverse_normal_cdf(0.5), 0.0, 1e-15);
    EXPECT_NEAR(inverse_normal_cdf(0.8413447460685429), 1.0, 1e-9);
    EXPECT_THROW(inverse_normal_cdf(0.0), std::domain_error);
    EXPECT_THROW(inverse_normal_cdf(1.0), std::domain_error);
}

TEST(CounterRng, DeterministicAndOrderIndependent) {
    const CounterRng rng(42, 7);
    std::vector<double> forward(64), backward(64);
    for (int i = 0; i < 64; ++i) forward[i] = rng.normal(i);
    for (int i = 63; i >= 0; --i) backward[i] = rng.normal(i);
    EXPECT_EQ(forward, backward);
    const CounterRng again(42, 7);
    for (int i = 0; i < 64; ++i) EXPECT_DOUBLE_EQ(forward[i], again.normal(i));
    const CounterRng other_stream(42, 8);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += forward[i] == other_stream.normal(i);
    EXPECT_EQ(same, 0);
}

TEST(CounterRng, UniformInOpenUnitInterval) {
    const CounterRng rng(1, 1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform(i);
        EXPECT_GT(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(CounterRng, NormalMomentsSane) {
    const CounterRng rng(2024, 3);
    const int n = 200000;
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(i);
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(m2, 1.0, 6.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(m4, 3.0, 20.0 / std::sqrt(static_cast<double>(n)));
}
