#pragma once

// Closed-form Gaussian expectations of staircase activations. Quadrature on
// a discontinuous integrand converges slowly, so staircases always take the
// cdf/orthant path; the semi-analytic quadrature route is kept for
// cross-validation.

#include <cmath>

#include "qprop/activation.hpp"
#include "qprop/gauss.hpp"

namespace qprop {

/// E_{u ~ N(0,q)} act(u) = A + sum_i h_i Phi(-g_i / sqrt(q)), exact.
inline double expect_1d(const QuantizedActivation& act, double q) {
    if (!(q >= 0.0)) throw std::domain_error("expect_1d: q must be >= 0");
    if (q == 0.0) return act.eval(0.0);
    double acc = act.base();
    const double inv = 1.0 / std::sqrt(q);
    for (std::size_t i = 0; i < act.offsets().size(); ++i)
        acc += act.heights()[i] * std_normal_cdf(-act.offsets()[i] * inv);
    return acc;
}

/// E[f(u1) g(u2)] for staircases under N(0, [[q1, c sqrt(q1 q2)], ...]),
/// exact via orthant probabilities.
inline double expect_2d_general(const QuantizedActivation& f, const QuantizedActivation& g,
                                double q1, double q2, double c) {
    if (!(q1 >= 0.0) || !(q2 >= 0.0))
        throw std::domain_error("expect_2d_general: variances must be >= 0");
    if (!(std::abs(c) <= 1.0)) throw std::domain_error("expect_2d_general: |c| must be <= 1");
    if (q1 == 0.0 || q2 == 0.0) {
        if (q1 == 0.0 && q2 == 0.0) return f.eval(0.0) * g.eval(0.0);
        // One marginal degenerate at 0: factorizes.
        return q1 == 0.0 ? f.eval(0.0) * expect_1d(g, q2) : expect_1d(f, q1) * g.eval(0.0);
    }
    const double i1 = 1.0 / std::sqrt(q1), i2 = 1.0 / std::sqrt(q2);
    const double Af = f.base(), Ag = g.base();
    double acc = Af * Ag;
    double sf = 0.0, sg = 0.0;
    for (std::size_t i = 0; i < f.offsets().size(); ++i)
        sf += f.heights()[i] * std_normal_cdf(-f.offsets()[i] * i1);
    for (std::size_t j = 0; j < g.offsets().size(); ++j)
        sg += g.heights()[j] * std_normal_cdf(-g.offsets()[j] * i2);
    acc += Af * sg + Ag * sf;
    for (std::size_t i = 0; i < f.offsets().size(); ++i) {
        const double a = f.offsets()[i] * i1;
        for (std::size_t j = 0; j < g.offsets().size(); ++j) {
            const double b = g.offsets()[j] * i2;
            acc += f.heights()[i] * g.heights()[j] * orthant_prob(a, b, c);
        }
    }
    return acc;
}

/// Equal-variance staircase pair expectation, exact via orthant probabilities.
inline double expect_2d(const QuantizedActivation& f, const QuantizedActivation& g,
                        const BivariateSpec& spec) {
    return expect_2d_general(f, g, spec.q, spec.q, spec.c);
}

/// Cross-check route for the orthant path: outer Gauss-Hermite over u1 with
/// the inner conditional expectation of the staircase taken in closed form.
/// The outer integrand is smooth, so the rule converges spectrally.
inline double expect_2d_staircase_quadrature(const QuantizedActivation& f,
                                             const QuantizedActivation& g,
                                             const BivariateSpec& spec,
                                             double tol = 1e-12) {
    if (spec.q == 0.0) return f.eval(0.0) * g.eval(0.0);
    const double cc = std::clamp(spec.c, -kCorrelationClamp, kCorrelationClamp);
    const double sq = std::sqrt(spec.q);
    const double cond_sd = sq * std::sqrt((1.0 - cc) * (1.0 + cc));
    // gbar(z) = E[g(u2) | u1 = sq z], a smooth function of z.
    const auto gbar = [&](double z) {
        const double mean = cc * sq * z;
        double acc = g.base();
        for (std::size_t j = 0; j < g.offsets().size(); ++j)
            acc += g.heights()[j] * std_normal_cdf((mean - g.offsets()[j]) / cond_sd);
        return acc;
    };
    const auto phim = [&](double z) { return std_normal_pdf(z) * gbar(z); };
    // E[f(u1) gbar] = A_f E[gbar] + sum_i h_i int_{g_i/sq}^{inf} phi gbar.
    double acc = f.base() * integrate(phim, -39.0, 39.0, tol);
    for (std::size_t i = 0; i < f.offsets().size(); ++i) {
        const double lo = f.offsets()[i] / sq;
        const double hi = std::max(lo, 0.0) + 39.0;
        if (lo < hi) acc += f.heights()[i] * integrate(phim, lo, hi, tol);
    }
    return acc;
}

}  // namespace qprop
