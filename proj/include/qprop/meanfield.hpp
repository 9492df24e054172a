#pragma once

// The covariance dynamical system for staircase activations: variance
// recursion Q -> Q', the correlation map M(C) at converged Q*, their fixed
// points and slopes, depth scales, and the sign-activation and stochastic
// rounding closed forms.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qprop/activation.hpp"
#include "qprop/expect.hpp"
#include "qprop/gauss.hpp"

namespace qprop {

struct HyperParams {
    double sigma_w2;  // weight variance
    double sigma_b2;  // bias variance

    HyperParams(double sigma_w2, double sigma_b2) : sigma_w2(sigma_w2), sigma_b2(sigma_b2) {
        if (!(sigma_w2 > 0.0)) throw std::domain_error("HyperParams: sigma_w2 must be > 0");
        if (!(sigma_b2 >= 0.0)) throw std::domain_error("HyperParams: sigma_b2 must be >= 0");
    }
};

struct CovState {
    double q;
    double c;

    CovState(double q, double c) : q(q), c(c) {
        if (!(q >= 0.0)) throw std::domain_error("CovState: q must be >= 0");
        if (!(std::abs(c) <= 1.0)) throw std::domain_error("CovState: |c| must be <= 1");
    }
};

struct MeanFieldReport {
    double q_star = 0.0;
    double q_hat_star = 0.0;  // post-activation variance at the fixed point
    double mu_star = 0.0;     // post-activation mean at the fixed point
    double c_star = 0.0;
    double chi = 0.0;
    double xi = 0.0;  // NaN when chi is outside (0, 1)
    int iterations_q = 0;
    int iterations_c = 0;
    bool c_star_clamped = false;  // singularity guard engaged in the chi evaluation
};

inline constexpr double kDefaultTol = 1e-12;
inline constexpr int kDefaultMaxIter = 10000;

/// Post-activation mean at pre-activation variance q (exact).
inline double mu(const QuantizedActivation& act, double q) {
    if (!(q > 0.0)) throw std::domain_error("mu: q must be > 0");
    return expect_1d(act, q);
}

/// Post-activation variance at pre-activation variance q (exact):
/// sum_ij h_i h_j Phi(-max(g_i,g_j)/sqrt(q)) Phi(min(g_i,g_j)/sqrt(q)).
inline double q_hat(const QuantizedActivation& act, double q) {
    if (!(q > 0.0)) throw std::domain_error("q_hat: q must be > 0");
    const auto& g = act.offsets();
    const auto& h = act.heights();
    const double inv = 1.0 / std::sqrt(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double gi = g[i] * inv;
        acc += h[i] * h[i] * std_normal_cdf(-gi) * std_normal_cdf(gi);
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            const double gj = g[j] * inv;
            acc += 2.0 * h[i] * h[j] * std_normal_cdf(-std::max(gi, gj)) *
                   std_normal_cdf(std::min(gi, gj));
        }
    }
    return acc;
}

/// One step of the variance recursion. Uses the post-activation second
/// moment Q_hat + mu^2, which reduces to the centered form when mu = 0.
inline double q_next(const QuantizedActivation& act, double q, const HyperParams& hp) {
    const double m = mu(act, q);
    return hp.sigma_w2 * (q_hat(act, q) + m * m) + hp.sigma_b2;
}

struct QSolve {
    double q_star;
    int iterations;
};

/// Fixed point of q_next from Q0 = sigma_w^2 + sigma_b^2 (relative
/// tolerance). Throws ConvergenceError carrying the last iterate.
inline QSolve solve_q_star(const QuantizedActivation& act, const HyperParams& hp,
                           double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    if (!(tol > 0.0)) throw std::domain_error("solve_q_star: tol must be > 0");
    double q = hp.sigma_w2 + hp.sigma_b2;
    for (int it = 1; it <= max_iter; ++it) {
        const double next = q_next(act, q, hp);
        if (!(next > 0.0))
            throw ConvergenceError("solve_q_star: variance iteration collapsed to 0", q, it);
        if (std::abs(next - q) <= tol * std::max(1.0, q)) return {next, it};
        q = next;
    }
    throw ConvergenceError("solve_q_star: no convergence", q, max_iter);
}

/// Exact correlation map at converged variance:
/// M(C) = (sigma_w^2 E[act(u1) act(u2)] + sigma_b^2) / Q*, orthant path.
inline double c_map(const QuantizedActivation& act, double q_star, double c,
                    const HyperParams& hp) {
    if (!(q_star > 0.0)) throw std::domain_error("c_map: q_star must be > 0");
    if (!(std::abs(c) <= 1.0)) throw std::domain_error("c_map: |c| must be <= 1");
    const double e = expect_2d(act, act, BivariateSpec(q_star, c));
    return (hp.sigma_w2 * e + hp.sigma_b2) / q_star;
}

/// Fixed-point slope at correlation c (exact, no quadrature):
/// chi = sigma_w^2/(2 pi Q* sqrt(1-c^2)) sum_ij h_i h_j
///       exp(-(g_i^2 - 2 c g_i g_j + g_j^2) / (2 Q* (1-c^2))).
inline double chi(const QuantizedActivation& act, double q_star, double c_star,
                  const HyperParams& hp) {
    if (!(q_star > 0.0)) throw std::domain_error("chi: q_star must be > 0");
    if (!(std::abs(c_star) < 1.0))
        throw std::domain_error("chi: |c_star| must be < 1 (map slope diverges at 1)");
    const auto& g = act.offsets();
    const auto& h = act.heights();
    const double om = (1.0 - c_star) * (1.0 + c_star);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            acc += h[i] * h[j] *
                   std::exp(-(g[i] * g[i] - 2.0 * c_star * g[i] * g[j] + g[j] * g[j]) /
                            (2.0 * q_star * om));
    return hp.sigma_w2 * acc / (2.0 * kPi * q_star * std::sqrt(om));
}

/// Scale-free slope at C* = 0, sigma_b = 0, in terms of normalized offsets:
/// ratio of the Gaussian-pair sum to the orthant sum. Invariant under
/// rescaling all heights.
inline double chi_normalized(const std::vector<double>& norm_offsets,
                             const std::vector<double>& heights) {
    if (norm_offsets.empty()) throw std::domain_error("chi_normalized: empty offsets");
    if (norm_offsets.size() != heights.size())
        throw std::domain_error("chi_normalized: size mismatch");
    double num = 0.0, den = 0.0;
    const std::size_t m = norm_offsets.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double gi = norm_offsets[i], gj = norm_offsets[j];
            const double hh = heights[i] * heights[j];
            num += hh * std::exp(-0.5 * (gi * gi + gj * gj));
            den += hh * std_normal_cdf(-std::max(gi, gj)) * std_normal_cdf(std::min(gi, gj));
        }
    }
    return num / (2.0 * kPi * den);
}

/// chi_normalized specialized to evenly spaced centered offsets
/// {(k - N/2) d_tilde : k = 1..N-1} with equal heights.
inline double chi_constant_spaced(int n_states, double d_tilde) {
    if (n_states < 2) throw std::domain_error("chi_constant_spaced: n_states must be >= 2");
    if (!(d_tilde > 0.0)) throw std::domain_error("chi_constant_spaced: d_tilde must be > 0");
    std::vector<double> g(n_states - 1);
    for (int k = 1; k < n_states; ++k) g[k - 1] = (k - n_states / 2.0) * d_tilde;
    return chi_normalized(g, std::vector<double>(n_states - 1, 1.0));
}

struct CSolve {
    double c_star;
    double chi;
    int iterations;
    bool clamped;  // c_star hit the correlation clamp in the chi evaluation
};

namespace detail {

inline double chi_clamped(const QuantizedActivation& act, double q_star, double c,
                          const HyperParams& hp, bool& clamped) {
    double cc = c;
    if (std::abs(cc) > kCorrelationClamp) {
        cc = std::clamp(cc, -kCorrelationClamp, kCorrelationClamp);
        clamped = true;
    }
    return chi(act, q_star, cc, hp);
}

}  // namespace detail

/// Stable fixed point of the exact map in [0, 1). Plain iteration from
/// C0 = 0 (monotone by convexity); a bisection fallback on M(C) - C kicks
/// in if the iteration stalls. Odd activations with sigma_b = 0 short-cut
/// to C* = 0 with the normalized-offset slope.
inline CSolve solve_c_star(const QuantizedActivation& act, const HyperParams& hp,
                           double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    const auto [q_star, it_q] = solve_q_star(act, hp, tol, max_iter);
    (void)it_q;
    if (hp.sigma_b2 == 0.0 && act.is_odd()) {
        const double x = chi_normalized(act.normalized_offsets(q_star), act.heights());
        return {0.0, x, 0, false};
    }
    double c = 0.0;
    double prev_step = std::numeric_limits<double>::infinity();
    int stall = 0;
    int iters = 0;
    for (int it = 1; it <= max_iter; ++it) {
        iters = it;
        const double next = c_map(act, q_star, c, hp);
        if (next < 0.0 || next > 1.0)
            throw ConvergenceError("solve_c_star: iteration left [0, 1]", next, it);
        const double step = std::abs(next - c);
        if (step <= tol) {
            bool clamped = false;
            const double x = detail::chi_clamped(act, q_star, next, hp, clamped);
            return {next, x, it, clamped};
        }
        // Plateau detection: the contraction should shrink steps steadily.
        if (step >= prev_step * (1.0 - 1e-9)) {
            if (++stall >= 100) break;
        } else {
            stall = 0;
        }
        prev_step = step;
        c = next;
    }
    // Bisection fallback on f(C) = M(C) - C over [c, 1): f(c) > 0 below the
    // stable fixed point and f < 0 just under 1 where the map bends convex.
    double lo = c, hi = kCorrelationClamp;
    double flo = c_map(act, q_star, lo, hp) - lo;
    double fhi = c_map(act, q_star, hi, hp) - hi;
    if (flo < 0.0 || fhi > 0.0)
        throw ConvergenceError("solve_c_star: no bracket for bisection fallback", c, iters);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = c_map(act, q_star, mid, hp) - mid;
        (fm > 0.0 ? lo : hi) = mid;
        ++iters;
    }
    const double cs = 0.5 * (lo + hi);
    bool clamped = false;
    const double x = detail::chi_clamped(act, q_star, cs, hp, clamped);
    return {cs, x, iters, clamped};
}

/// xi = -1/ln(chi) for chi in (0, 1).
inline double depth_scale(double chi_value) {
    if (!(chi_value > 0.0 && chi_value < 1.0))
        throw std::domain_error("depth_scale: chi must be in (0, 1)");
    return -1.0 / std::log(chi_value);
}

/// Full fixed-point summary for one activation + hyperparameter setting.
inline MeanFieldReport analyze(const QuantizedActivation& act, const HyperParams& hp,
                               double tol = kDefaultTol, int max_iter = kDefaultMaxIter) {
    MeanFieldReport r;
    const auto qs = solve_q_star(act, hp, tol, max_iter);
    r.q_star = qs.q_star;
    r.iterations_q = qs.iterations;
    r.mu_star = mu(act, r.q_star);
    r.q_hat_star = q_hat(act, r.q_star);
    const auto cs = solve_c_star(act, hp, tol, max_iter);
    r.c_star = cs.c_star;
    r.chi = cs.chi;
    r.iterations_c = cs.iterations;
    r.c_star_clamped = cs.clamped;
    r.xi = (cs.chi > 0.0 && cs.chi < 1.0) ? depth_scale(cs.chi)
                                          : std::numeric_limits<double>::quiet_NaN();
    return r;
}

struct SignClosedForms {
    double map_value;
    double chi_value;
    double q_star;
};

/// Sign-activation closed forms: Q* = sw2 + sb2,
/// M(C) = ((2 sw2/pi) asin(C) + sb2) / Q*, chi = 2 sw2 / (pi Q* sqrt(1-C^2)).
inline SignClosedForms sign_closed_forms(const HyperParams& hp, double c) {
    if (!(std::abs(c) <= 1.0)) throw std::domain_error("sign_closed_forms: |c| must be <= 1");
    const double q = hp.sigma_w2 + hp.sigma_b2;
    SignClosedForms out;
    out.q_star = q;
    out.map_value = ((2.0 * hp.sigma_w2 / kPi) * std::asin(c) + hp.sigma_b2) / q;
    if (std::abs(c) < 1.0) {
        out.chi_value = 2.0 * hp.sigma_w2 / (kPi * q * std::sqrt((1.0 - c) * (1.0 + c)));
    } else {
        throw std::domain_error("sign_closed_forms: chi singular at |c| = 1");
    }
    return out;
}

struct StochasticSign {
    double b_factor;
    double map_value;
    double chi_value;
    double c_star_taylor;
};

/// Stochastic rounding sign(u + n), n ~ N(0, a^2). Post-activation map
/// M_sr(C_hat) = (2/pi) asin(C_u / B) with C_u the pre-activation
/// correlation and B = sqrt(1 + (a/Q*)^2 (2 Q* + a^2)); slope
/// chi = 2 sw2 / (pi Q* sqrt(B^2 - C_u^2)); Taylor estimate of C_hat*.
inline StochasticSign stochastic_sign(const HyperParams& hp, double a, double c_hat) {
    if (!(a >= 0.0)) throw std::domain_error("stochastic_sign: a must be >= 0");
    if (!(std::abs(c_hat) <= 1.0)) throw std::domain_error("stochastic_sign: |c_hat| must be <= 1");
    const double q = hp.sigma_w2 + hp.sigma_b2;
    const double r = a / q;
    const double b = std::sqrt(1.0 + r * r * (2.0 * q + a * a));
    const double cu = (c_hat * hp.sigma_w2 + hp.sigma_b2) / q;
    StochasticSign out;
    out.b_factor = b;
    out.map_value = (2.0 / kPi) * std::asin(cu / b);
    out.chi_value = 2.0 * hp.sigma_w2 / (kPi * q * std::sqrt(b * b - cu * cu));
    const double w = hp.sigma_w2 / (q * b);
    const double t = std::pow(kPi / 2.0, 4) * (b * b - b) * (q / hp.sigma_w2) * (q / hp.sigma_w2);
    out.c_star_taylor = 1.0 - (4.0 / (kPi * kPi)) * w * (1.0 + std::sqrt(1.0 + t));
    return out;
}

struct ApproxMapValue {
    double value;
    bool out_of_regime;  // some |g_i| exceeds sqrt(Q*): approximation unreliable
};

/// Closed-form approximation of the post-activation map M_hat(C_hat),
/// accurate near C ~ 0 with offsets inside sqrt(Q*). c_hat is mapped to the
/// pre-activation correlation through the affine relation, and the
/// approximate pair sum replaces the orthant integrals.
inline ApproxMapValue c_map_approx(const QuantizedActivation& act, double q_star, double c_hat,
                                   const HyperParams& hp) {
    if (!(q_star > 0.0)) throw std::domain_error("c_map_approx: q_star must be > 0");
    if (!(std::abs(c_hat) <= 1.0)) throw std::domain_error("c_map_approx: |c_hat| must be <= 1");
    const double qh = q_hat(act, q_star);
    const double m = mu(act, q_star);
    const double c = (hp.sigma_w2 * (qh * c_hat + m * m) + hp.sigma_b2) / q_star;
    ApproxMapValue out;
    out.out_of_regime = false;
    const double sqq = std::sqrt(q_star);
    for (double g : act.offsets())
        if (std::abs(g) > sqq) out.out_of_regime = true;
    if (c == 0.0) {
        out.value = 0.0;
        return out;
    }
    const double cc = std::clamp(c, -kCorrelationClamp, kCorrelationClamp);
    const double s = std::sqrt((1.0 - cc) * (1.0 + cc));
    const double as = std::asin(cc);
    const double k = 0.5 * cc / (as * q_star * s);
    const double cross = 2.0 * cc / (1.0 + s);
    const auto& g = act.offsets();
    const auto& h = act.heights();
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            acc += h[i] * h[j] *
                   std::exp(-k * (g[i] * g[i] + g[j] * g[j] - g[i] * g[j] * cross));
    out.value = as / (2.0 * kPi * qh) * acc;
    return out;
}

struct ApproxChiStar {
    double chi;
    double c_hat_star_estimate;
    double q_star;
    bool first_order_valid;  // false when chi(C_hat = 0) >= 1
    bool out_of_regime;
};

/// Four-step fixed-point-slope estimate for sigma_b >= 0:
/// 1) Q* by iteration; 2) M_hat(C_hat = 0) via the approximate map;
/// 3) chi at C_hat = 0; 4) first-order estimate
/// C_hat* ~ M_hat(0) / (1 - chi(0)), then chi at the estimate.
inline ApproxChiStar approx_chi_star(const QuantizedActivation& act, const HyperParams& hp,
                                     int t_iters = 64) {
    if (t_iters < 1) throw std::domain_error("approx_chi_star: t_iters must be >= 1");
    double q = hp.sigma_w2 + hp.sigma_b2;
    for (int t = 0; t < t_iters; ++t) {
        const double next = q_next(act, q, hp);
        if (std::abs(next - q) <= kDefaultTol * std::max(1.0, q)) {
            q = next;
            break;
        }
        q = next;
    }
    const double qh = q_hat(act, q);
    const double m = mu(act, q);
    const auto m0 = c_map_approx(act, q, 0.0, hp);
    const double c0 = (hp.sigma_w2 * m * m + hp.sigma_b2) / q;
    bool clamp_unused = false;
    const double chi0 =
        detail::chi_clamped(act, q, std::clamp(c0, -1.0, 1.0), hp, clamp_unused);
    ApproxChiStar out;
    out.q_star = q;
    out.out_of_regime = m0.out_of_regime;
    out.first_order_valid = chi0 < 1.0;
    if (!out.first_order_valid) {
        out.c_hat_star_estimate = std::numeric_limits<double>::quiet_NaN();
        out.chi = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double chat = m0.value / (1.0 - chi0);
    out.c_hat_star_estimate = chat;
    const double cs = (hp.sigma_w2 * (qh * chat + m * m) + hp.sigma_b2) / q;
    out.chi = detail::chi_clamped(act, q, std::clamp(cs, -1.0, 1.0), hp, clamp_unused);
    return out;
}

/// Slope of the variance map dQ'/dQ at variance q:
/// (sw2 / 2Q) sum_ij h_i h_j [G+ pdf(G+) Phi(G-) - G- pdf(G-) Phi(-G+)]
/// with G+/- the max/min of the normalized offset pair.
inline double chi_q(const QuantizedActivation& act, double q, double sigma_w2) {
    if (!(q > 0.0)) throw std::domain_error("chi_q: q must be > 0");
    const auto& g = act.offsets();
    const auto& h = act.heights();
    const double inv = 1.0 / std::sqrt(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double gp = std::max(g[i], g[j]) * inv;
            const double gm = std::min(g[i], g[j]) * inv;
            acc += h[i] * h[j] *
                   (gp * std_normal_pdf(gp) * std_normal_cdf(gm) -
                    gm * std_normal_pdf(gm) * std_normal_cdf(-gp));
        }
    }
    return sigma_w2 * acc / (2.0 * q);
}

/// Slope of the post-activation map M_hat at correlation c_hat, via the
/// bivariate-density pair sum at the corresponding pre-activation
/// correlation. Equals the pre-activation chi there (rate equivalence).
inline double post_activation_slope(const QuantizedActivation& act, const HyperParams& hp,
                                    double c_hat, double tol = kDefaultTol,
                                    int max_iter = kDefaultMaxIter) {
    const double q = solve_q_star(act, hp, tol, max_iter).q_star;
    const double qh = q_hat(act, q);
    const double m = mu(act, q);
    const double c = (hp.sigma_w2 * (qh * c_hat + m * m) + hp.sigma_b2) / q;
    const double cc = std::clamp(c, -kCorrelationClamp, kCorrelationClamp);
    const auto gt = act.normalized_offsets(q);
    const auto& h = act.heights();
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        for (std::size_t j = 0; j < gt.size(); ++j)
            acc += h[i] * h[j] * binormal_pdf(gt[i], gt[j], cc);
    return hp.sigma_w2 * acc / q;
}

}  // namespace qprop
