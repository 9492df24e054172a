#pragma once

// Gaussian probability primitives: univariate cdf/pdf, correlated orthant
// probabilities, and expectations over univariate and bivariate normals.
// Staircase integrands always go through closed forms built on the normal
// cdf; quadrature is reserved for smooth integrands.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qprop/errors.hpp"

namespace qprop {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kCorrelationClamp = 1.0 - 1e-12;

/// Standard normal cdf.
inline double std_normal_cdf(double x) {
    if (!std::isfinite(x)) throw std::domain_error("std_normal_cdf: non-finite input");
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Standard normal density.
inline double std_normal_pdf(double x) {
    if (!std::isfinite(x)) throw std::domain_error("std_normal_pdf: non-finite input");
    static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Density of the standard bivariate normal with correlation c at (a, b).
inline double binormal_pdf(double a, double b, double c) {
    const double cc = std::clamp(c, -kCorrelationClamp, kCorrelationClamp);
    const double om = 1.0 - cc * cc;
    return std::exp(-(a * a - 2.0 * cc * a * b + b * b) / (2.0 * om)) /
           (2.0 * 3.14159265358979323846 * std::sqrt(om));
}

/// Equal-variance bivariate spec: covariance q * [[1, c], [c, 1]].
struct BivariateSpec {
    double q;
    double c;

    BivariateSpec(double q, double c) : q(q), c(c) {
        if (!(q >= 0.0)) throw std::domain_error("BivariateSpec: q must be >= 0");
        if (!(std::abs(c) <= 1.0)) throw std::domain_error("BivariateSpec: |c| must be <= 1");
    }
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr double kKronrodX[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
    -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
inline constexpr double kKronrodW[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
inline constexpr double kGaussW[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870};

template <typename F>
void gk15(const F& f, double a, double b, double& value, double& error) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double vk = 0.0, vg = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double fx = f(mid + half * kKronrodX[i]);
        vk += kKronrodW[i] * fx;
        if (i % 2 == 1) vg += kGaussW[i / 2] * fx;
    }
    value = vk * half;
    error = std::abs((vk - vg) * half);
}

// Adaptive bisection on the error estimate. The integrands here are smooth
// products of exp and erfc, so subdivision depth stays shallow.
template <typename F>
double adaptive_gk(const F& f, double a, double b, double tol, int depth = 0) {
    double v, e;
    gk15(f, a, b, v, e);
    if (e <= tol || depth >= 48 || b - a < 1e-14) return v;
    const double mid = 0.5 * (a + b);
    return adaptive_gk(f, a, mid, 0.5 * tol, depth + 1) +
           adaptive_gk(f, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a, b] to absolute tolerance tol.
template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-12) {
    if (!(a <= b)) throw std::domain_error("integrate: bad interval");
    return detail::adaptive_gk(f, a, b, tol);
}

/// P(U1 > a, U2 > b) for a standard bivariate normal with correlation c.
/// Reduces to a 1-D integral of the conditional cdf, evaluated adaptively.
/// |c| in (1-1e-12, 1] is clamped; |c| > 1 is a domain error.
inline double orthant_prob(double a, double b, double c, double tol = 1e-13) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
        throw std::domain_error("orthant_prob: non-finite input");
    if (std::abs(c) > 1.0) throw std::domain_error("orthant_prob: |c| > 1");
    const double cc = std::clamp(c, -kCorrelationClamp, kCorrelationClamp);
    const double s = std::sqrt((1.0 - cc) * (1.0 + cc));
    // Integrate over the variable with the larger lower cut; the integrand
    // then decays from its left endpoint and the window stays short.
    double lo = a, cut = b;
    if (b > a) { lo = b; cut = a; }
    const double hi = std::max(lo, 0.0) + 39.0;
    if (lo >= hi) return 0.0;
    const auto f = [&](double u) {
        return std_normal_pdf(u) * std_normal_cdf((cc * u - cut) / s);
    };
    return detail::adaptive_gk(f, lo, hi, tol);
}

namespace detail {

// Gauss-Hermite rule mapped to N(0,1): E f(Z) ~ sum w_i f(z_i).
// Nodes from the symmetric tridiagonal Jacobi matrix (Golub-Welsch),
// computed once per order and cached.
struct HermiteRule {
    std::vector<double> z, w;
};

inline HermiteRule build_hermite(int n) {
    // Golub-Welsch on the Jacobi matrix of the (physicists') Hermite
    // polynomials: diagonal 0, off-diagonal sqrt(k/2). Eigenvalues are the
    // physicists' nodes; squared first eigenvector components are the
    // weights after normalization. Mapping z = sqrt(2) t converts the rule
    // to expectations under N(0,1), with weights summing to 1.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) throw std::runtime_error("hermite: eigensolve failed");
    HermiteRule rule;
    rule.z.resize(n);
    rule.w.resize(n);
    const double sqrt2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        rule.z[i] = sqrt2 * es.eigenvalues()(i);
        const double q0 = es.eigenvectors()(0, i);
        rule.w[i] = q0 * q0;
    }
    return rule;
}

inline const HermiteRule& hermite_rule(int n) {
    thread_local std::vector<std::pair<int, HermiteRule>> cache;
    for (auto& [order, rule] : cache)
        if (order == n) return rule;
    cache.emplace_back(n, build_hermite(n));
    return cache.back().second;
}

}  // namespace detail

inline constexpr int kDefaultHermiteOrder = 128;

/// E_{u ~ N(0,q)} f(u) by Gauss-Hermite quadrature (smooth f).
template <typename F>
double expect_1d(const F& f, double q, int order = kDefaultHermiteOrder) {
    if (!(q >= 0.0)) throw std::domain_error("expect_1d: q must be >= 0");
    if (q == 0.0) return f(0.0);
    const auto& rule = detail::hermite_rule(order);
    const double sq = std::sqrt(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.z.size(); ++i) acc += rule.w[i] * f(sq * rule.z[i]);
    return acc;
}

/// E[f(u1) g(u2)] with (u1,u2) ~ N(0, Sigma(q,c)) by tensorized Gauss-Hermite
/// through the Cholesky factor of Sigma (smooth f, g).
template <typename F, typename G>
double expect_2d(const F& f, const G& g, const BivariateSpec& spec,
                 int order = kDefaultHermiteOrder) {
    if (spec.q == 0.0) return f(0.0) * g(0.0);
    const auto& rule = detail::hermite_rule(order);
    const double cc = std::clamp(spec.c, -kCorrelationClamp, kCorrelationClamp);
    const double sq = std::sqrt(spec.q);
    const double s = std::sqrt((1.0 - cc) * (1.0 + cc));
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.z.size(); ++i) {
        const double u1 = sq * rule.z[i];
        double inner = 0.0;
        for (std::size_t j = 0; j < rule.z.size(); ++j) {
            const double u2 = sq * (cc * rule.z[i] + s * rule.z[j]);
            inner += rule.w[j] * g(u2);
        }
        acc += rule.w[i] * f(u1) * inner;
    }
    return acc;
}

}  // namespace qprop
