#pragma once

// Asymptotic NTK for staircase networks: the covariance recursion over a
// labeled input set (per-pair variances handled exactly), the layered
// sum-of-products kernel with STE or smoothed backward factors, and the
// deep-limit structure / signal-to-noise diagnostics.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qprop/activation.hpp"
#include "qprop/expect.hpp"
#include "qprop/meanfield.hpp"
#include "qprop/parallel.hpp"
#include "qprop/rng.hpp"

namespace qprop {

struct LabeledGram {
    Eigen::MatrixXd gram;     // x_i . x_j / n0
    std::vector<int> labels;

    LabeledGram(Eigen::MatrixXd g, std::vector<int> y) : gram(std::move(g)), labels(std::move(y)) {
        if (gram.rows() != gram.cols()) throw std::domain_error("LabeledGram: gram not square");
        if (static_cast<Eigen::Index>(labels.size()) != gram.rows())
            throw std::domain_error("LabeledGram: label count mismatch");
        if (!gram.isApprox(gram.transpose(), 1e-12))
            throw std::domain_error("LabeledGram: gram not symmetric");
        for (Eigen::Index i = 0; i < gram.rows(); ++i)
            if (!(gram(i, i) > 0.0)) throw std::domain_error("LabeledGram: non-positive diagonal");
    }
};

/// Rows of data (points x features) to inner-product gram over n0.
inline LabeledGram gram_from_data(const Eigen::MatrixXd& X, std::vector<int> labels) {
    Eigen::MatrixXd g = X * X.transpose() / static_cast<double>(X.cols());
    return LabeledGram(std::move(g), std::move(labels));
}

struct KernelMatrix {
    Eigen::MatrixXd entries;
    int depth = 0;
};

enum class DerivativeKind {
    ste,       // hard-tanh surrogate: phi'(u) = rho * 1{|u| <= 1}
    smoothed,  // distributional staircase derivative (delta comb pair sum)
};

namespace detail {

// sigma_w^2 E[phi(u1) phi(u2)] + sigma_b^2 with per-input variances.
inline double sigma_step(const QuantizedActivation& act, const HyperParams& hp, double q1,
                         double q2, double cov) {
    const double c = cov / std::sqrt(q1 * q2);
    return hp.sigma_w2 * expect_2d_general(act, act, q1, q2, std::clamp(c, -1.0, 1.0)) +
           hp.sigma_b2;
}

// sigma_w^2 E[phi'(u1) phi'(u2)] for the chosen derivative kind.
inline double sigma_dot(const QuantizedActivation& act, DerivativeKind kind, double rho,
                        const HyperParams& hp, double q1, double q2, double cov) {
    const double c = std::clamp(cov / std::sqrt(q1 * q2), -kCorrelationClamp, kCorrelationClamp);
    if (kind == DerivativeKind::ste) {
        const double a = 1.0 / std::sqrt(q1), b = 1.0 / std::sqrt(q2);
        const double p = orthant_prob(-a, -b, c) - orthant_prob(a, -b, c) -
                         orthant_prob(-a, b, c) + orthant_prob(a, b, c);
        return hp.sigma_w2 * rho * rho * p;
    }
    const auto& g = act.offsets();
    const auto& h = act.heights();
    const double i1 = 1.0 / std::sqrt(q1), i2 = 1.0 / std::sqrt(q2);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            acc += h[i] * h[j] * binormal_pdf(g[i] * i1, g[j] * i2, c);
    return hp.sigma_w2 * acc * i1 * i2;
}

}  // namespace detail

/// Pre-activation covariances Sigma^(1..depth+1); Sigma^(1) is the affine
/// gram transform and each later level is the exact pairwise expectation.
inline std::vector<Eigen::MatrixXd> sigma_recursion(const LabeledGram& g,
                                                    const QuantizedActivation& act,
                                                    const HyperParams& hp, int depth) {
    if (depth < 1) throw std::domain_error("sigma_recursion: depth must be >= 1");
    const Eigen::Index n = g.gram.rows();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(depth + 1);
    out.push_back(hp.sigma_w2 * g.gram + hp.sigma_b2 * Eigen::MatrixXd::Ones(n, n));
    for (int l = 1; l <= depth; ++l) {
        const Eigen::MatrixXd& prev = out.back();
        Eigen::MatrixXd next(n, n);
        std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
        pairs.reserve(n * (n + 1) / 2);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);
        parallel_for(pairs.size(), [&](std::size_t k) {
            const auto [i, j] = pairs[k];
            next(i, j) = next(j, i) =
                detail::sigma_step(act, hp, prev(i, i), prev(j, j), prev(i, j));
        });
        out.push_back(std::move(next));
    }
    return out;
}

/// Asymptotic NTK at the given depth (depth 0 = single layer = Sigma^(1)),
/// via the recurrence Theta_l = SigmaDot_l . Theta_{l-1} + Sigma_l with the
/// backward factor taken over the covariance feeding each level.
inline KernelMatrix ntk_asymptotic(const LabeledGram& g, const QuantizedActivation& act,
                                   DerivativeKind kind, double rho, const HyperParams& hp,
                                   int depth) {
    if (depth < 0) throw std::domain_error("ntk_asymptotic: depth must be >= 0");
    const Eigen::Index n = g.gram.rows();
    Eigen::MatrixXd sigma = hp.sigma_w2 * g.gram + hp.sigma_b2 * Eigen::MatrixXd::Ones(n, n);
    Eigen::MatrixXd theta = sigma;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(n * (n + 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);
    for (int l = 2; l <= depth + 1; ++l) {
        Eigen::MatrixXd next(n, n), dot(n, n);
        parallel_for(pairs.size(), [&](std::size_t k) {
            const auto [i, j] = pairs[k];
            const double q1 = sigma(i, i), q2 = sigma(j, j), cov = sigma(i, j);
            next(i, j) = next(j, i) = detail::sigma_step(act, hp, q1, q2, cov);
            dot(i, j) = dot(j, i) = detail::sigma_dot(act, kind, rho, hp, q1, q2, cov);
        });
        theta = (dot.array() * theta.array()).matrix() + next;
        sigma = std::move(next);
    }
    return {std::move(theta), depth};
}

/// One pass producing kernels at several depths (ascending).
inline std::vector<KernelMatrix> ntk_by_depths(const LabeledGram& g,
                                               const QuantizedActivation& act,
                                               DerivativeKind kind, double rho,
                                               const HyperParams& hp,
                                               const std::vector<int>& depths) {
    for (std::size_t i = 1; i < depths.size(); ++i)
        if (depths[i] <= depths[i - 1])
            throw std::domain_error("ntk_by_depths: depths must be ascending");
    if (depths.empty()) return {};
    const Eigen::Index n = g.gram.rows();
    Eigen::MatrixXd sigma = hp.sigma_w2 * g.gram + hp.sigma_b2 * Eigen::MatrixXd::Ones(n, n);
    Eigen::MatrixXd theta = sigma;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<KernelMatrix> out;
    std::size_t want = 0;
    if (depths[want] == 0) {
        out.push_back({theta, 0});
        ++want;
    }
    for (int l = 2; want < depths.size(); ++l) {
        Eigen::MatrixXd next(n, n), dot(n, n);
        parallel_for(pairs.size(), [&](std::size_t k) {
            const auto [i, j] = pairs[k];
            const double q1 = sigma(i, i), q2 = sigma(j, j), cov = sigma(i, j);
            next(i, j) = next(j, i) = detail::sigma_step(act, hp, q1, q2, cov);
            dot(i, j) = dot(j, i) = detail::sigma_dot(act, kind, rho, hp, q1, q2, cov);
        });
        theta = (dot.array() * theta.array()).matrix() + next;
        sigma = std::move(next);
        const int depth_now = l - 1;
        if (depth_now == depths[want]) {
            out.push_back({theta, depth_now});
            ++want;
        }
    }
    return out;
}

struct SnrMetrics {
    std::vector<double> signal;     // S_i
    std::vector<double> noise;      // N_i
    double mean_signal = 0.0;       // S
    double snr = 0.0;               // mean of S_i / N_i over points with N_i != 0
    int excluded = 0;               // points with N_i = 0
};

/// Same-label off-diagonal row mass S_i, complementary row mass N_i
/// (row 1-norm minus S_i), and their aggregates.
inline SnrMetrics snr_metrics(const KernelMatrix& k, const std::vector<int>& labels) {
    const Eigen::Index n = k.entries.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::domain_error("snr_metrics: label count mismatch");
    SnrMetrics out;
    out.signal.resize(n);
    out.noise.resize(n);
    double snr_acc = 0.0;
    int counted = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0, l1 = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            l1 += std::abs(k.entries(i, j));
            if (j != i && labels[j] == labels[i]) s += k.entries(i, j);
        }
        out.signal[i] = s;
        out.noise[i] = l1 - s;
        out.mean_signal += s;
        if (out.noise[i] != 0.0) {
            snr_acc += s / out.noise[i];
            ++counted;
        } else {
            ++out.excluded;
        }
    }
    out.mean_signal /= static_cast<double>(n);
    out.snr = counted > 0 ? snr_acc / counted : 0.0;
    return out;
}

struct DeepLimitRow {
    int depth = 0;
    double alpha = 0.0;       // mean diagonal of Theta/(depth+1)
    double beta = 0.0;        // mean off-diagonal of Theta/(depth+1)
    double dispersion = 0.0;  // off-diagonal standard deviation
    int excluded_pairs = 0;   // duplicate-input pairs left out of beta
};

/// Per-depth estimates of the deep-limit structure alpha delta + beta(1-delta).
/// Off-diagonal entries equal to both touching diagonals (duplicated inputs)
/// are excluded from the off-diagonal statistics.
inline std::vector<DeepLimitRow> deep_limit_structure(const std::vector<KernelMatrix>& ks) {
    if (ks.size() < 2) throw std::domain_error("deep_limit_structure: need >= 2 depths");
    std::vector<DeepLimitRow> out;
    out.reserve(ks.size());
    for (const auto& k : ks) {
        const Eigen::Index n = k.entries.rows();
        const double norm = 1.0 / (k.depth + 1.0);
        DeepLimitRow row;
        row.depth = k.depth;
        for (Eigen::Index i = 0; i < n; ++i) row.alpha += k.entries(i, i) * norm;
        row.alpha /= static_cast<double>(n);
        double sum = 0.0, sum2 = 0.0;
        int cnt = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                const double v = k.entries(i, j);
                const double rel = std::max({std::abs(v), std::abs(k.entries(i, i)), 1e-300});
                if (std::abs(v - k.entries(i, i)) < 1e-9 * rel &&
                    std::abs(v - k.entries(j, j)) < 1e-9 * rel) {
                    ++row.excluded_pairs;
                    continue;
                }
                sum += v * norm;
                sum2 += v * norm * v * norm;
                ++cnt;
            }
        }
        if (cnt > 0) {
            row.beta = sum / cnt;
            row.dispersion = std::sqrt(std::max(0.0, sum2 / cnt - row.beta * row.beta));
        }
        out.push_back(row);
    }
    return out;
}

/// Synthetic two-class set: one Gaussian cluster per class, positive means
/// so the raw gram mimics image-like data. Deterministic in the seed.
inline std::pair<Eigen::MatrixXd, std::vector<int>> make_two_cluster_data(
    int n0, int n_points, double mean0, double mean1, double sd, std::uint64_t seed) {
    if (n0 < 1 || n_points < 2) throw std::domain_error("make_two_cluster_data: bad sizes");
    const CounterRng rng(seed, 5ULL << 32);
    Eigen::MatrixXd X(n_points, n0);
    std::vector<int> y(n_points);
    const int half = n_points / 2;
    for (int i = 0; i < n_points; ++i) {
        const double m = i < half ? mean0 : mean1;
        y[i] = i < half ? 0 : 1;
        const std::uint64_t base = static_cast<std::uint64_t>(i) * n0;
        for (int j = 0; j < n0; ++j) X(i, j) = m + sd * rng.normal(base + j);
    }
    return {std::move(X), std::move(y)};
}

}  // namespace qprop
