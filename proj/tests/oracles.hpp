#pragma once

// Test-side oracles, independent of the library paths they validate:
// a series/continued-fraction erf, adaptive 2-D quadrature over the
// bivariate density, and a seeded Monte Carlo expectation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "qprop/activation.hpp"
#include "qprop/rng.hpp"

namespace oracle {

// erf by Taylor series for small |x| and Lentz continued fraction for the
// complementary tail; cross-checked pair with ~1e-16 agreement.
inline double erf_series(double x) {
    const double ax = std::abs(x);
    double sum = 0.0, term = ax;
    for (int n = 0; n < 200; ++n) {
        sum += term / (2 * n + 1);
        term *= -ax * ax / (n + 1.0);
        if (std::abs(term) < 1e-20 * std::abs(sum)) break;
    }
    const double v = 2.0 / std::sqrt(3.14159265358979323846) * sum;
    return x < 0 ? -v : v;
}

inline double erfc_contfrac(double x) {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/(2x + 2/(x + 3/(2x + ...))))
    // evaluated bottom-up for x > 0.
    double f = 0.0;
    for (int k = 60; k >= 1; --k) {
        const double a = 0.5 * k;
        f = a / (x + f);
    }
    return std::exp(-x * x) / std::sqrt(3.14159265358979323846) / (x + f);
}

inline double erf_oracle(double x) {
    if (std::abs(x) < 2.0) return erf_series(x);
    const double t = erfc_contfrac(std::abs(x));
    return x > 0 ? 1.0 - t : t - 1.0;
}

inline double normal_cdf_oracle(double x) {
    // Phi(x) = erfc(-x/sqrt 2)/2 assembled from the oracle pieces only.
    const double z = -x / std::sqrt(2.0);
    if (z <= 0.0) return 1.0 - 0.5 * (std::abs(z) < 2.0 ? 1.0 - erf_series(std::abs(z))
                                                        : erfc_contfrac(std::abs(z)));
    return 0.5 * (z < 2.0 ? 1.0 - erf_series(z) : erfc_contfrac(z));
}

// Adaptive Simpson in 1-D, recursive on the error estimate.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, fm, flm, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, fb, frm, 0.5 * tol, depth - 1);
}

inline double integrate_1d(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-12) {
    const double m = 0.5 * (a + b);
    return simpson(f, a, b, f(a), f(b), f(m), tol, 40);
}

// E[f(u1) g(u2)] under the correlated standard bivariate normal by nested
// adaptive Simpson over the conditional decomposition.
inline double expect2_quadrature(const std::function<double(double)>& f,
                                 const std::function<double(double)>& g, double c,
                                 double tol = 1e-12) {
    const double s = std::sqrt(1.0 - c * c);
    const double lim = 9.0;
    const auto inner = [&](double z1) {
        const auto h = [&](double z2) {
            const double u2 = c * z1 + s * z2;
            return std::exp(-0.5 * z2 * z2) / std::sqrt(2 * 3.14159265358979323846) * g(u2);
        };
        return integrate_1d(h, -lim, lim, tol);
    };
    const auto outer = [&](double z1) {
        return std::exp(-0.5 * z1 * z1) / std::sqrt(2 * 3.14159265358979323846) * f(z1) *
               inner(z1);
    };
    return integrate_1d(outer, -lim, lim, tol);
}

// Seeded Monte Carlo E[f(u1) g(u2)] with (u1,u2) ~ N(0, q [[1,c],[c,1]]),
// returning the estimate and the standard error of the mean.
struct McResult {
    double mean;
    double se;
};

inline McResult mc_expect2(const std::function<double(double)>& f,
                           const std::function<double(double)>& g, double q, double c,
                           std::uint64_t n, std::uint64_t seed) {
    const qprop::CounterRng rng(seed, 0x4D43ULL /* "MC" */);
    const double sq = std::sqrt(q);
    const double s = std::sqrt(1.0 - c * c);
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double z1 = rng.normal(2 * i);
        const double z2 = rng.normal(2 * i + 1);
        const double v = f(sq * z1) * g(sq * (c * z1 + s * z2));
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = (sum2 / n - mean * mean) / (n - 1.0);
    return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace oracle
