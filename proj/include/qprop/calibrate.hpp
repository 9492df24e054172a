#pragma once

// Optimization and fitting on top of the mean-field layer: optimal
// constant-spacing search, the power law of the maximal slope in the number
// of states, depth-scale prediction, initialization recommendations, the
// STE slope calibration, and hyperparameter grids.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qprop/activation.hpp"
#include "qprop/meanfield.hpp"
#include "qprop/parallel.hpp"

namespace qprop {

struct SpacingCurve {
    int n_states = 0;
    std::vector<std::pair<double, double>> samples;  // (d_tilde, chi)
    double d_tilde_opt = 0.0;
    double chi_max = 0.0;
    bool degenerate = false;  // N = 2: the slope does not depend on the spacing
};

inline constexpr double kSpacingGridLo = 1e-2;
inline constexpr double kSpacingGridHi = 1e1;

/// Coarse log-spaced scan of chi_constant_spaced followed by golden-section
/// refinement of the maximum. N = 2 yields a flat curve at 2/pi and is
/// flagged degenerate with the grid midpoint reported.
inline SpacingCurve optimize_spacing(int n_states, int coarse_points = 200,
                                     double refine_tol = 1e-6) {
    if (n_states < 2) throw std::domain_error("optimize_spacing: n_states must be >= 2");
    if (coarse_points < 3) throw std::domain_error("optimize_spacing: coarse_points must be >= 3");
    if (!(refine_tol > 0.0)) throw std::domain_error("optimize_spacing: refine_tol must be > 0");
    SpacingCurve out;
    out.n_states = n_states;
    out.samples.resize(coarse_points);
    const double llo = std::log(kSpacingGridLo), lhi = std::log(kSpacingGridHi);
    for (int i = 0; i < coarse_points; ++i) {
        const double d = std::exp(llo + (lhi - llo) * i / (coarse_points - 1.0));
        out.samples[i] = {d, chi_constant_spaced(n_states, d)};
    }
    if (n_states == 2) {
        out.degenerate = true;
        out.d_tilde_opt = std::exp(0.5 * (llo + lhi));
        out.chi_max = 2.0 / kPi;
        return out;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.samples.size(); ++i)
        if (out.samples[i].second > out.samples[best].second) best = i;
    double a = out.samples[best == 0 ? 0 : best - 1].first;
    double b = out.samples[best + 1 < out.samples.size() ? best + 1 : best].first;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = chi_constant_spaced(n_states, x1), f2 = chi_constant_spaced(n_states, x2);
    while (b - a > refine_tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = chi_constant_spaced(n_states, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = chi_constant_spaced(n_states, x1);
        }
    }
    out.d_tilde_opt = 0.5 * (a + b);
    out.chi_max = chi_constant_spaced(n_states, out.d_tilde_opt);
    out.samples.emplace_back(out.d_tilde_opt, out.chi_max);
    return out;
}

struct PowerLawFit {
    double exponent = 0.0;       // slope of ln(1 - chi_max) vs ln(N + shift)
    double log_intercept = 0.0;
    double residual = 0.0;       // RMS residual in log space
    double shift = 1.0;          // abscissa shift: fit against N + shift
};

/// Ordinary least squares of ln(1 - chi_max) against ln(n_states + 1).
inline PowerLawFit fit_power_law(const std::vector<std::pair<int, double>>& points) {
    if (points.size() < 3) throw std::domain_error("fit_power_law: need at least 3 points");
    PowerLawFit fit;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [n, chi_max] : points) {
        if (!(chi_max > 0.0 && chi_max < 1.0))
            throw std::domain_error("fit_power_law: chi_max must be in (0, 1)");
        const double x = std::log(n + fit.shift);
        const double y = std::log(1.0 - chi_max);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(points.size());
    const double det = m * sxx - sx * sx;
    if (std::abs(det) < 1e-12 * m * sxx)
        throw std::domain_error("fit_power_law: degenerate design matrix");
    fit.exponent = (m * sxy - sx * sy) / det;
    fit.log_intercept = (sy - fit.exponent * sx) / m;
    double rss = 0.0;
    for (const auto& [n, chi_max] : points) {
        const double x = std::log(n + fit.shift);
        const double r = std::log(1.0 - chi_max) - (fit.log_intercept + fit.exponent * x);
        rss += r * r;
    }
    fit.residual = std::sqrt(rss / m);
    return fit;
}

struct DepthScalePrediction {
    double exact = 0.0;   // -1 / ln(1 - e^b (N+1)^p)
    double approx = 0.0;  // (1/2) (N+1)^(-p), the large-N form
};

inline DepthScalePrediction predicted_depth_scale(int n_states, const PowerLawFit& fit) {
    if (n_states < 2) throw std::domain_error("predicted_depth_scale: n_states must be >= 2");
    const double eps =
        std::exp(fit.log_intercept) * std::pow(n_states + fit.shift, fit.exponent);
    DepthScalePrediction out;
    if (!(eps > 0.0 && eps < 1.0))
        throw std::domain_error("predicted_depth_scale: 1 - e^b (N+1)^p outside (0, 1)");
    out.exact = -1.0 / std::log(1.0 - eps);
    out.approx = 0.5 * std::pow(n_states + fit.shift, -fit.exponent);
    return out;
}

struct InitRecommendation {
    double sigma_w = 0.0;
    double sigma_b = 0.0;  // always 0: bias noise only hurts propagation
    double rho = 0.0;      // STE slope keeping the Jacobian moment at 1
    double q_star = 0.0;
    double q_hat_star = 0.0;
    double xavier_factor = 0.0;  // 1 + 1.23 / (N + 0.2)^2
};

/// STE slope with unit Jacobian moment: rho = 1 / (sigma_w sqrt(erf(1/sqrt(2 Q*)))).
inline double ste_rho(double sigma_w, double q_star) {
    if (!(sigma_w > 0.0)) throw std::domain_error("ste_rho: sigma_w must be > 0");
    if (!(q_star > 0.0)) throw std::domain_error("ste_rho: q_star must be > 0");
    return 1.0 / (sigma_w * std::sqrt(std::erf(1.0 / std::sqrt(2.0 * q_star))));
}

inline double xavier_factor(int n_states) {
    if (n_states < 2) throw std::domain_error("xavier_factor: n_states must be >= 2");
    const double d = n_states + 0.2;
    return 1.0 + 1.23 / (d * d);
}

/// Weight scale placing the constant-spaced activation at its optimal
/// normalized spacing: sigma_w = (1/sqrt(Qhat*)) (D / d_tilde_opt) with
/// Qhat* evaluated at unit variance on the optimally spaced offsets.
inline InitRecommendation init_params(int n_states, double d_tilde_opt) {
    if (n_states < 2) throw std::domain_error("init_params: n_states must be >= 2");
    if (!(d_tilde_opt > 0.0)) throw std::domain_error("init_params: d_tilde_opt must be > 0");
    const double d = 2.0 / (n_states - 1);
    std::vector<double> gt(n_states - 1);
    for (int i = 1; i < n_states; ++i) gt[i - 1] = d_tilde_opt * (i - n_states / 2.0);
    const QuantizedActivation normalized(-1.0, std::move(gt),
                                         std::vector<double>(n_states - 1, d));
    InitRecommendation out;
    out.q_hat_star = q_hat(normalized, 1.0);
    out.sigma_w = (1.0 / std::sqrt(out.q_hat_star)) * (d / d_tilde_opt);
    out.sigma_b = 0.0;
    out.q_star = (d / d_tilde_opt) * (d / d_tilde_opt);
    out.rho = ste_rho(out.sigma_w, out.q_star);
    out.xavier_factor = xavier_factor(n_states);
    return out;
}

struct Grid {
    std::vector<double> rows;    // first axis values (sigma_w or d0)
    std::vector<double> cols;    // second axis values (sigma_b or d1)
    std::vector<double> values;  // row-major xi; NaN marks invalid cells
    double at(std::size_t i, std::size_t j) const { return values[i * cols.size() + j]; }
};

/// Depth scale over a (sigma_w, sigma_b) grid for the constant-spaced
/// activation with unit offset spacing, via the approximate fixed-point
/// slope. Cells with chi <= 0 report xi = 0.
inline Grid grid_depthscale(int n_states, std::pair<double, double> sigma_w_range,
                            std::pair<double, double> sigma_b_range, int resolution) {
    if (n_states < 2) throw std::domain_error("grid_depthscale: n_states must be >= 2");
    if (resolution < 1) throw std::domain_error("grid_depthscale: resolution must be >= 1");
    if (!(sigma_w_range.first > 0.0))
        throw std::domain_error("grid_depthscale: sigma_w must be > 0");
    if (!(sigma_b_range.first >= 0.0))
        throw std::domain_error("grid_depthscale: sigma_b must be >= 0");
    const double d = 1.0;
    std::vector<double> g(n_states - 1), h(n_states - 1, 2.0 / (n_states - 1));
    for (int i = 1; i < n_states; ++i) g[i - 1] = d * (i - n_states / 2.0);
    const QuantizedActivation act(-1.0, std::move(g), std::move(h));
    Grid out;
    out.rows.resize(resolution);
    out.cols.resize(resolution);
    for (int i = 0; i < resolution; ++i) {
        const double t = resolution == 1 ? 0.0 : i / (resolution - 1.0);
        out.rows[i] = sigma_w_range.first + t * (sigma_w_range.second - sigma_w_range.first);
        out.cols[i] = sigma_b_range.first + t * (sigma_b_range.second - sigma_b_range.first);
    }
    out.values.assign(static_cast<std::size_t>(resolution) * resolution, 0.0);
    parallel_for(out.values.size(), [&](std::size_t k) {
        const double sw = out.rows[k / resolution];
        const double sb = out.cols[k % resolution];
        const auto est = approx_chi_star(act, HyperParams(sw * sw, sb * sb));
        if (!est.first_order_valid || est.chi >= 1.0)
            throw std::domain_error("grid_depthscale: chi >= 1 should be impossible");
        out.values[k] = est.chi <= 0.0 ? 0.0 : depth_scale(est.chi);
    });
    return out;
}

/// Depth scale over the (d0, d1) grid of the linear-spacing family at
/// sigma_b = 0, using the scale-free normalized slope. Non-monotone offset
/// orderings mark the cell invalid (NaN).
inline Grid grid_linear_spacing(int n_states, std::pair<double, double> d0_range,
                                std::pair<double, double> d1_range, int resolution) {
    if (n_states < 2) throw std::domain_error("grid_linear_spacing: n_states must be >= 2");
    if (resolution < 1) throw std::domain_error("grid_linear_spacing: resolution must be >= 1");
    Grid out;
    out.rows.resize(resolution);
    out.cols.resize(resolution);
    for (int i = 0; i < resolution; ++i) {
        const double t = resolution == 1 ? 0.0 : i / (resolution - 1.0);
        out.rows[i] = d0_range.first + t * (d0_range.second - d0_range.first);
        out.cols[i] = d1_range.first + t * (d1_range.second - d1_range.first);
    }
    out.values.assign(static_cast<std::size_t>(resolution) * resolution, 0.0);
    const std::vector<double> h(n_states - 1, 1.0);
    parallel_for(out.values.size(), [&](std::size_t k) {
        const double d0 = out.rows[k / resolution];
        const double d1 = out.cols[k % resolution];
        std::vector<double> gt(n_states - 1);
        bool ok = d0 > 0.0;
        for (int i = 1; i < n_states && ok; ++i) {
            const double m = i - n_states / 2.0;
            gt[i - 1] = d0 * m * (1.0 + d1 * std::abs(m));
            if (i > 1 && !(gt[i - 1] > gt[i - 2])) ok = false;
        }
        if (!ok) {
            out.values[k] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        const double chi = chi_normalized(gt, h);
        out.values[k] = (chi > 0.0 && chi < 1.0) ? depth_scale(chi)
                                                 : std::numeric_limits<double>::quiet_NaN();
    });
    return out;
}

struct CqPoint {
    double sigma_w = 0.0;
    double chi_c = 0.0;
    double chi_q = 0.0;
};

/// Correlation-direction vs variance-direction slopes over a log-spaced
/// sigma_w grid, for the family with offsets
/// (2/(N-1)) m (1 + (beta/N^2) |m|), m = i - N/2, at sigma_b = 0.
inline std::vector<CqPoint> grid_cq_comparison(int n_states, double beta,
                                               std::pair<double, double> sigma_w_range,
                                               int points) {
    if (n_states < 2) throw std::domain_error("grid_cq_comparison: n_states must be >= 2");
    if (points < 1) throw std::domain_error("grid_cq_comparison: points must be >= 1");
    if (!(sigma_w_range.first > 0.0) || !(sigma_w_range.second >= sigma_w_range.first))
        throw std::domain_error("grid_cq_comparison: bad sigma_w range");
    std::vector<double> g(n_states - 1), h(n_states - 1, 2.0 / (n_states - 1));
    for (int i = 1; i < n_states; ++i) {
        const double m = i - n_states / 2.0;
        g[i - 1] = (2.0 / (n_states - 1)) * m * (1.0 + beta / (n_states * n_states) * std::abs(m));
    }
    const QuantizedActivation act(-1.0, std::move(g), std::move(h));
    std::vector<CqPoint> out(points);
    const double llo = std::log(sigma_w_range.first), lhi = std::log(sigma_w_range.second);
    parallel_for(out.size(), [&](std::size_t k) {
        const double sw =
            std::exp(points == 1 ? llo : llo + (lhi - llo) * k / (points - 1.0));
        const HyperParams hp(sw * sw, 0.0);
        const double q = solve_q_star(act, hp).q_star;
        out[k].sigma_w = sw;
        out[k].chi_c = chi(act, q, 0.0, hp);
        out[k].chi_q = chi_q(act, q, hp.sigma_w2);
    });
    return out;
}

}  // namespace qprop
