#include "qprop/activation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qprop/descriptor.hpp"

using namespace qprop;

TEST(ConstantSpaced, TwoStatesIsSign) {
    const auto act = make_constant_spaced(2);
    EXPECT_DOUBLE_EQ(act.base(), -1.0);
    ASSERT_EQ(act.offsets().size(), 1u);
    EXPECT_DOUBLE_EQ(act.offsets()[0], 0.0);
    EXPECT_DOUBLE_EQ(act.heights()[0], 2.0);
    EXPECT_EQ(act.num_states(), 2);
}

TEST(ConstantSpaced, ThreeStates) {
    const auto act = make_constant_spaced(3);
    ASSERT_EQ(act.offsets().size(), 2u);
    EXPECT_DOUBLE_EQ(act.offsets()[0], -0.5);
    EXPECT_DOUBLE_EQ(act.offsets()[1], 0.5);
    EXPECT_DOUBLE_EQ(act.heights()[0], 1.0);
    EXPECT_DOUBLE_EQ(act.heights()[1], 1.0);
    EXPECT_DOUBLE_EQ(act.eval(-0.7), -1.0);
    EXPECT_DOUBLE_EQ(act.eval(0.0), 0.0);
    EXPECT_DOUBLE_EQ(act.eval(0.7), 1.0);
}

TEST(ConstantSpaced, Saturation) {
    for (int n : {2, 3, 4, 9, 16}) {
        const auto act = make_constant_spaced(n);
        EXPECT_DOUBLE_EQ(act.eval(1e6), 1.0) << n;
        EXPECT_DOUBLE_EQ(act.eval(-1e6), -1.0) << n;
        EXPECT_EQ(act.num_states(), n);
    }
}

TEST(ConstantSpaced, OddFunction) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    for (int n : {2, 3, 8, 15}) {
        const auto act = make_constant_spaced(n);
        EXPECT_TRUE(act.is_odd());
        for (int k = 0; k < 100; ++k) {
            double x = ux(gen);
            // Stay off the offsets where the one-sided convention breaks oddness.
            bool on_offset = false;
            for (double g : act.offsets())
                if (std::abs(x - g) < 1e-12 || std::abs(x + g) < 1e-12) on_offset = true;
            if (on_offset) continue;
            // States carry one accumulation rounding each; compare to a few ulps.
            EXPECT_NEAR(act.eval(-x), -act.eval(x), 1e-14);
        }
    }
}

TEST(ConstantSpaced, RejectsFewerThanTwoStates) {
    EXPECT_THROW(make_constant_spaced(1), std::domain_error);
}

TEST(Eval, RightContinuousAtOffsets) {
    const auto sign = make_sign();
    EXPECT_DOUBLE_EQ(sign.eval(0.0), 1.0);   // H(0) = 1
    EXPECT_DOUBLE_EQ(sign.eval(-0.1), -1.0);
    EXPECT_DOUBLE_EQ(sign.eval(0.1), 1.0);
}

TEST(Eval, TotalRiseEqualsHeightSum) {
    const QuantizedActivation act(-0.7, {-1.0, 0.1, 2.0}, {0.5, 0.25, 1.0});
    double sum = 0.0;
    for (double h : act.heights()) sum += h;
    EXPECT_DOUBLE_EQ(act.eval(1e9) - act.eval(-1e9), sum);
}

TEST(Construction, MergesCoincidentOffsets) {
    const QuantizedActivation merged(0.0, {1.0, -1.0, 1.0}, {0.5, 0.25, 0.75});
    ASSERT_EQ(merged.offsets().size(), 2u);
    EXPECT_DOUBLE_EQ(merged.offsets()[0], -1.0);
    EXPECT_DOUBLE_EQ(merged.offsets()[1], 1.0);
    EXPECT_DOUBLE_EQ(merged.heights()[1], 1.25);
    // Evaluation is preserved versus the unmerged sum.
    const auto raw = [](double x) {
        return (x >= 1.0 ? 0.5 : 0.0) + (x >= -1.0 ? 0.25 : 0.0) + (x >= 1.0 ? 0.75 : 0.0);
    };
    for (double x : {-2.0, -1.0, 0.0, 0.99, 1.0, 3.0}) EXPECT_DOUBLE_EQ(merged.eval(x), raw(x));
}

TEST(Construction, RejectsBadInput) {
    EXPECT_THROW(QuantizedActivation(0.0, {0.0}, {0.0}), std::domain_error);
    EXPECT_THROW(QuantizedActivation(0.0, {0.0}, {-1.0}), std::domain_error);
    EXPECT_THROW(QuantizedActivation(0.0, {}, {}), std::domain_error);
    EXPECT_THROW(QuantizedActivation(0.0, {0.0, 1.0}, {1.0}), std::domain_error);
}

TEST(LinearSpaced, ZeroCurvatureMatchesConstantSpacedUpToScale) {
    const int n = 6;
    const double d0 = 0.8;
    const auto lin = make_linear_spaced(n, d0, 0.0);
    const auto con = make_constant_spaced(n);
    const double scale = d0 * (n - 1) / 2.0;
    ASSERT_EQ(lin.offsets().size(), con.offsets().size());
    for (std::size_t i = 0; i < lin.offsets().size(); ++i)
        EXPECT_NEAR(lin.offsets()[i], scale * con.offsets()[i], 1e-12);
}

TEST(LinearSpaced, FormulaValues) {
    // N=4: m in {-1, 0, 1}; offsets d0 m (1 + d1 |m|).
    const auto act = make_linear_spaced(4, 1.0, 0.5);
    ASSERT_EQ(act.offsets().size(), 3u);
    EXPECT_DOUBLE_EQ(act.offsets()[0], -1.5);
    EXPECT_DOUBLE_EQ(act.offsets()[1], 0.0);
    EXPECT_DOUBLE_EQ(act.offsets()[2], 1.5);
}

TEST(LinearSpaced, PositiveCurvatureWidensOutward) {
    const auto act = make_linear_spaced(8, 0.5, 0.4);
    const auto& g = act.offsets();
    for (std::size_t i = 2; i < g.size(); ++i) {
        if (g[i - 2] >= 0.0) EXPECT_GT(g[i] - g[i - 1], g[i - 1] - g[i - 2]);
    }
}

TEST(LinearSpaced, RejectsNonMonotone) {
    try {
        make_linear_spaced(8, 1.0, -0.4);
        FAIL() << "expected domain_error";
    } catch (const std::domain_error& e) {
        EXPECT_NE(std::string(e.what()).find("index"), std::string::npos);
    }
}

TEST(NormalizedOffsets, Scaling) {
    const auto act = make_constant_spaced(4);
    const auto same = act.normalized_offsets(1.0);
    for (std::size_t i = 0; i < same.size(); ++i) EXPECT_DOUBLE_EQ(same[i], act.offsets()[i]);
    const auto halved = act.normalized_offsets(4.0);
    for (std::size_t i = 0; i < halved.size(); ++i)
        EXPECT_DOUBLE_EQ(halved[i], act.offsets()[i] / 2.0);
    EXPECT_DOUBLE_EQ(make_sign().normalized_offsets(17.3)[0], 0.0);
    EXPECT_THROW(act.normalized_offsets(0.0), std::domain_error);
}

TEST(SteSurrogate, DerivativeWindow) {
    const SteSurrogate ste(1.5);
    EXPECT_DOUBLE_EQ(ste.derivative(0.0), 1.5);
    EXPECT_DOUBLE_EQ(ste.derivative(0.999), 1.5);
    EXPECT_DOUBLE_EQ(ste.derivative(1.001), 0.0);
    EXPECT_DOUBLE_EQ(ste.derivative(-3.0), 0.0);
    EXPECT_THROW(SteSurrogate(0.0), std::domain_error);
}

TEST(Descriptor, ParsesAllKinds) {
    const auto sign = activation_from_string(R"({"kind":"sign"})");
    EXPECT_EQ(sign.num_states(), 2);
    const auto con = activation_from_string(R"({"kind":"constant","states":10})");
    EXPECT_EQ(con.num_states(), 10);
    const auto lin = activation_from_string(R"({"kind":"linear","states":4,"d0":1.0,"d1":0.5})");
    EXPECT_DOUBLE_EQ(lin.offsets()[2], 1.5);
    const auto gen = activation_from_string(
        R"({"kind":"general","base":-0.5,"offsets":[0.0,1.0],"heights":[0.25,0.75]})");
    EXPECT_EQ(gen.num_states(), 3);
    EXPECT_EQ(activation_from_string("sign").num_states(), 2);
    EXPECT_EQ(activation_from_string("constant:5").num_states(), 5);
    EXPECT_THROW(activation_from_string("nope"), std::domain_error);
    EXPECT_THROW(activation_from_string(R"({"kind":"wat"})"), std::domain_error);
}
