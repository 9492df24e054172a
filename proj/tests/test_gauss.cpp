#include "qprop/gauss.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qprop/activation.hpp"
#include "qprop/expect.hpp"

using namespace qprop;

TEST(StdNormalCdf, KnownValues) {
    EXPECT_DOUBLE_EQ(std_normal_cdf(0.0), 0.5);
    EXPECT_NEAR(std_normal_cdf(40.0), 1.0, 1e-14);
    // Oracle: series / continued-fraction erf.
    EXPECT_NEAR(std_normal_cdf(1.0), oracle::normal_cdf_oracle(1.0), 1e-15);
    EXPECT_NEAR(std_normal_cdf(1.0), 0.8413447460685429, 1e-14);
    EXPECT_NEAR(std_normal_cdf(-2.5), oracle::normal_cdf_oracle(-2.5), 1e-15);
}

TEST(StdNormalCdf, Symmetry) {
    for (double x : {0.1, 0.7, 1.3, 2.9, 5.5}) {
        EXPECT_NEAR(std_normal_cdf(-x), 1.0 - std_normal_cdf(x), 1e-14);
    }
}

TEST(StdNormalCdf, RejectsNonFinite) {
    EXPECT_THROW(std_normal_cdf(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    EXPECT_THROW(std_normal_pdf(std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST(StdNormalPdf, KnownValues) {
    EXPECT_NEAR(std_normal_pdf(0.0), 0.3989422804014327, 1e-15);
    EXPECT_NEAR(std_normal_pdf(1.0), 0.24197072451914337, 1e-15);
    EXPECT_DOUBLE_EQ(std_normal_pdf(1.7), std_normal_pdf(-1.7));
}

TEST(StdNormalPdf, NormalizesUnderQuadrature) {
    const double total = integrate([](double x) { return std_normal_pdf(x); }, -12.0, 12.0, 1e-13);
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(OrthantProb, IndependenceFactorization) {
    for (double a : {-1.2, 0.0, 0.4, 2.0}) {
        for (double b : {-0.5, 0.3, 1.1}) {
            EXPECT_NEAR(orthant_prob(a, b, 0.0), std_normal_cdf(-a) * std_normal_cdf(-b), 1e-11);
        }
    }
}

TEST(OrthantProb, ZeroThresholdClosedForm) {
    // P(U1>0, U2>0) = 1/4 + asin(c)/(2 pi).
    for (double c : {-0.9, -0.4, 0.0, 0.3, 0.7, 0.95}) {
        EXPECT_NEAR(orthant_prob(0.0, 0.0, c), 0.25 + std::asin(c) / (2.0 * kPi), 1e-11);
    }
}

TEST(OrthantProb, MatchesAdaptive2dOracle) {
    const auto H = [](double t) { return [t](double u) { return u > t ? 1.0 : 0.0; }; };
    const double got = orthant_prob(0.5, -0.3, 0.7);
    const double want = oracle::expect2_quadrature(H(0.5), H(-0.3), 0.7, 1e-13);
    EXPECT_NEAR(got, want, 1e-10);
}

TEST(OrthantProb, QuadrantDecompositionSumsToOne) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ua(-2.0, 2.0), uc(-0.98, 0.98);
    for (int k = 0; k < 50; ++k) {
        const double a = ua(gen), b = ua(gen), c = uc(gen);
        const double total = orthant_prob(a, b, c) + orthant_prob(-a, b, -c) +
                             orthant_prob(a, -b, -c) + orthant_prob(-a, -b, c);
        EXPECT_NEAR(total, 1.0, 1e-9) << "a=" << a << " b=" << b << " c=" << c;
    }
}

TEST(OrthantProb, DomainAndClamp) {
    EXPECT_THROW(orthant_prob(0.0, 0.0, 1.5), std::domain_error);
    EXPECT_THROW(orthant_prob(0.0, 0.0, -1.0001), std::domain_error);
    // |c| = 1 is clamped, not rejected.
    EXPECT_NEAR(orthant_prob(0.0, 0.0, 1.0), 0.5, 1e-6);
    EXPECT_NEAR(orthant_prob(0.0, 0.0, -1.0), 0.0, 1e-6);
}

TEST(Expect1d, OddFunctionVanishes) {
    const auto sign = make_sign();
    EXPECT_NEAR(expect_1d(sign, 0.7), 0.0, 1e-15);
    EXPECT_NEAR(expect_1d(sign, 3.0), 0.0, 1e-15);
}

TEST(Expect1d, VarianceIdentity) {
    EXPECT_NEAR(expect_1d([](double x) { return x * x; }, 2.0), 2.0, 1e-12);
}

TEST(Expect1d, StepClosedForm) {
    // H(x - 1) under N(0,1): Phi(-1).
    const QuantizedActivation step(0.0, {1.0}, {1.0});
    EXPECT_NEAR(expect_1d(step, 1.0), oracle::normal_cdf_oracle(-1.0), 1e-14);
}

TEST(Expect1d, RejectsNegativeVariance) {
    EXPECT_THROW(expect_1d([](double x) { return x; }, -1.0), std::domain_error);
    EXPECT_THROW(expect_1d(make_sign(), -0.5), std::domain_error);
}

TEST(Expect2d, SignPairArcsine) {
    const auto sign = make_sign();
    for (double c : {-0.8, -0.25, 0.0, 0.5, 0.9}) {
        EXPECT_NEAR(expect_2d(sign, sign, BivariateSpec(1.0, c)), 2.0 / kPi * std::asin(c), 1e-10);
    }
}

TEST(Expect2d, PerfectCorrelationIsSecondMoment) {
    const auto act = make_constant_spaced(5);
    const double lhs = expect_2d(act, act, BivariateSpec(1.3, 1.0));
    // E[phi^2] summed over the constant cells between offsets.
    const double sq = std::sqrt(1.3);
    double rhs = 0.0;
    double prev_cdf = 0.0;
    for (std::size_t k = 0; k <= act.offsets().size(); ++k) {
        const double hi =
            k < act.offsets().size() ? std_normal_cdf(act.offsets()[k] / sq) : 1.0;
        double val = act.base();
        for (std::size_t i = 0; i < k; ++i) val += act.heights()[i];
        rhs += val * val * (hi - prev_cdf);
        prev_cdf = hi;
    }
    // c = 1 goes through the correlation clamp; allow the sqrt(eps) error.
    EXPECT_NEAR(lhs, rhs, 1e-5);
}

TEST(Expect2d, ThreeStateMatchesMonteCarlo) {
    const auto act = make_constant_spaced(3);
    const auto f = [&](double x) { return act.eval(x); };
    const auto mc = oracle::mc_expect2(f, f, 1.0, 0.5, 4'000'000, 20240809);
    const double got = expect_2d(act, act, BivariateSpec(1.0, 0.5));
    EXPECT_NEAR(got, mc.mean, 3.0 * mc.se);
}

TEST(Expect2d, IndependenceFactorizes) {
    const auto act = make_constant_spaced(4);
    const QuantizedActivation other(0.3, {-0.2, 0.9}, {0.5, 1.1});
    const double joint = expect_2d(act, other, BivariateSpec(1.7, 0.0));
    EXPECT_NEAR(joint, expect_1d(act, 1.7) * expect_1d(other, 1.7), 1e-9);
}

TEST(Expect2d, MonotoneInCorrelationForMonotonePair) {
    const auto act = make_constant_spaced(6);
    double prev = -std::numeric_limits<double>::infinity();
    for (double c = -0.95; c <= 0.96; c += 0.05) {
        const double v = expect_2d(act, act, BivariateSpec(0.8, c));
        EXPECT_GE(v, prev - 1e-10);
        prev = v;
    }
}

TEST(Expect2d, OrthantPathAgreesWithSemiAnalyticQuadrature) {
    const auto act = make_constant_spaced(7);
    const QuantizedActivation skew(-0.4, {-1.1, 0.2, 0.6}, {0.4, 0.8, 0.3});
    for (double c : {-0.7, 0.2, 0.85}) {
        const BivariateSpec spec(1.9, c);
        EXPECT_NEAR(expect_2d(act, skew, spec), expect_2d_staircase_quadrature(act, skew, spec),
                    1e-8);
    }
}

TEST(Expect2d, SmoothPairAgainstQuadratureOracle) {
    const auto f = [](double x) { return std::tanh(x); };
    const double got = expect_2d(f, f, BivariateSpec(1.0, 0.6));
    const double want = oracle::expect2_quadrature(f, f, 0.6, 1e-13);
    EXPECT_NEAR(got, want, 1e-10);
}

TEST(BivariateSpecValidation, Rejects) {
    EXPECT_THROW(BivariateSpec(-0.1, 0.0), std::domain_error);
    EXPECT_THROW(BivariateSpec(1.0, 1.2), std::domain_error);
}
