#pragma once

// Seeded Monte Carlo networks at finite width: weight generation from
// counter-based streams, the input-circle experiment with per-layer
// empirical covariances, the empirical convergence-rate estimate, and the
// STE Jacobian moment. Everything is a pure function of (spec, seed).

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qprop/activation.hpp"
#include "qprop/errors.hpp"
#include "qprop/meanfield.hpp"
#include "qprop/parallel.hpp"
#include "qprop/rng.hpp"

namespace qprop {

struct NetworkSpec {
    int input_dim;
    int width;
    int depth;
    HyperParams hp;
    std::uint64_t seed;

    NetworkSpec(int input_dim, int width, int depth, HyperParams hp, std::uint64_t seed)
        : input_dim(input_dim), width(width), depth(depth), hp(hp), seed(seed) {
        if (input_dim < 2) throw std::domain_error("NetworkSpec: input_dim must be >= 2");
        if (width < 1) throw std::domain_error("NetworkSpec: width must be >= 1");
        if (depth < 1) throw std::domain_error("NetworkSpec: depth must be >= 1");
    }
};

struct ManifoldSpec {
    int num_samples;
    double q_star_scale;  // squared norm of every input point
    std::uint64_t seed;

    ManifoldSpec(int num_samples, double q_star_scale, std::uint64_t seed)
        : num_samples(num_samples), q_star_scale(q_star_scale), seed(seed) {
        if (num_samples < 2) throw std::domain_error("ManifoldSpec: num_samples must be >= 2");
        if (!(q_star_scale > 0.0))
            throw std::domain_error("ManifoldSpec: q_star_scale must be > 0");
    }
};

struct LayerStats {
    int layer = 0;
    double q_emp = 0.0;          // mean over inputs of the per-neuron second moment
    std::vector<double> c_emp;   // correlation binned by angle-difference index
};

namespace detail {

// Stream ids per role; layer-local indices address individual entries.
inline constexpr std::uint64_t kStreamWeights = 1ULL << 32;
inline constexpr std::uint64_t kStreamBiases = 2ULL << 32;
inline constexpr std::uint64_t kStreamManifold = 3ULL << 32;
inline constexpr std::uint64_t kStreamJacobian = 4ULL << 32;
inline constexpr std::uint64_t kStreamData = 5ULL << 32;

}  // namespace detail

/// Lazily materialized random network. Weight matrices are regenerated
/// per layer on demand from the counter stream, so the memory footprint is
/// one layer at a time.
class Network {
public:
    explicit Network(const NetworkSpec& spec, std::size_t memory_budget_bytes = 2ULL << 30)
        : spec_(spec), budget_(memory_budget_bytes) {}

    const NetworkSpec& spec() const { return spec_; }

    int fan_in(int layer) const { return layer == 1 ? spec_.input_dim : spec_.width; }

    /// W^(layer), entries N(0, sigma_w^2 / fan_in); layer is 1-based.
    Eigen::MatrixXd weight(int layer) const {
        check_layer(layer);
        const int rows = spec_.width, cols = fan_in(layer);
        const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(rows) * cols;
        if (bytes > budget_)
            throw ResourceError("Network::weight: layer exceeds memory budget", bytes);
        const CounterRng rng(spec_.seed, detail::kStreamWeights + static_cast<std::uint64_t>(layer));
        const double sd = std::sqrt(spec_.hp.sigma_w2 / cols);
        Eigen::MatrixXd w(rows, cols);
        for (int i = 0; i < rows; ++i) {
            const std::uint64_t row_base = static_cast<std::uint64_t>(i) * cols;
            for (int j = 0; j < cols; ++j) w(i, j) = sd * rng.normal(row_base + j);
        }
        return w;
    }

    /// b^(layer), entries N(0, sigma_b^2); exactly zero when sigma_b^2 = 0.
    Eigen::VectorXd bias(int layer) const {
        check_layer(layer);
        Eigen::VectorXd b(spec_.width);
        if (spec_.hp.sigma_b2 == 0.0) {
            b.setZero();
            return b;
        }
        const CounterRng rng(spec_.seed, detail::kStreamBiases + static_cast<std::uint64_t>(layer));
        const double sd = std::sqrt(spec_.hp.sigma_b2);
        for (int i = 0; i < spec_.width; ++i) b(i) = sd * rng.normal(i);
        return b;
    }

private:
    void check_layer(int layer) const {
        if (layer < 1 || layer > spec_.depth)
            throw std::domain_error("Network: layer out of range");
    }

    NetworkSpec spec_;
    std::size_t budget_;
};

inline Network build_network(const NetworkSpec& spec) { return Network(spec); }

/// r points on the circle spanned by two Gram-Schmidt-orthonormalized
/// random vectors, scaled so every column has squared norm q_star_scale.
/// Column i sits at angle 2 pi i / r; pairwise input correlations are
/// exactly cos of the angle difference.
inline Eigen::MatrixXd manifold_inputs(int n0, const ManifoldSpec& m) {
    if (n0 < 2) throw std::domain_error("manifold_inputs: n0 must be >= 2");
    const CounterRng rng(m.seed, detail::kStreamManifold);
    Eigen::VectorXd u0(n0), u1(n0);
    for (int i = 0; i < n0; ++i) {
        u0(i) = rng.normal(2 * static_cast<std::uint64_t>(i));
        u1(i) = rng.normal(2 * static_cast<std::uint64_t>(i) + 1);
    }
    u0.normalize();
    u1 -= u0 * u0.dot(u1);
    u1.normalize();
    const double scale = std::sqrt(m.q_star_scale);
    Eigen::MatrixXd out(n0, m.num_samples);
    for (int i = 0; i < m.num_samples; ++i) {
        const double th = 2.0 * kPi * i / m.num_samples;
        out.col(i) = scale * (std::cos(th) * u0 + std::sin(th) * u1);
    }
    return out;
}

namespace detail {

inline LayerStats layer_stats_from_pre(const Eigen::MatrixXd& pre, int layer) {
    const int width = static_cast<int>(pre.rows());
    const int r = static_cast<int>(pre.cols());
    LayerStats st;
    st.layer = layer;
    Eigen::MatrixXd gram = pre.transpose() * pre / static_cast<double>(width);
    Eigen::VectorXd d = gram.diagonal().cwiseSqrt();
    st.q_emp = gram.diagonal().mean();
    st.c_emp.assign(r / 2 + 1, 0.0);
    for (int delta = 0; delta <= r / 2; ++delta) {
        double acc = 0.0;
        for (int i = 0; i < r; ++i) {
            const int j = (i + delta) % r;
            acc += gram(i, j) / (d(i) * d(j));
        }
        st.c_emp[delta] = acc / r;
    }
    return st;
}

}  // namespace detail

/// Forward pass collecting pre-activation statistics at every layer.
/// Inputs must be the columns of a manifold built by manifold_inputs (the
/// angle binning assumes evenly spaced angles).
inline std::vector<LayerStats> forward_collect(const Network& net, const QuantizedActivation& act,
                                               const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != net.spec().input_dim)
        throw std::domain_error("forward_collect: input dimension mismatch");
    std::vector<LayerStats> stats;
    stats.reserve(net.spec().depth);
    Eigen::MatrixXd post = inputs;  // phi(alpha^(0)) = x
    for (int l = 1; l <= net.spec().depth; ++l) {
        Eigen::MatrixXd pre = net.weight(l) * post;
        if (net.spec().hp.sigma_b2 != 0.0) pre.colwise() += net.bias(l);
        stats.push_back(detail::layer_stats_from_pre(pre, l));
        if (l < net.spec().depth) {
            post.resize(pre.rows(), pre.cols());
            for (Eigen::Index j = 0; j < pre.cols(); ++j)
                for (Eigen::Index i = 0; i < pre.rows(); ++i) post(i, j) = act.eval(pre(i, j));
        }
    }
    return stats;
}

struct RateEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    int layers_used = 0;
    int seeds = 0;
};

/// Empirical fixed-point slope: forward two probe inputs whose initial
/// correlations bracket C*, average the per-layer deviations over seeds,
/// and regress deviation_{l+1} on deviation_l through the origin over the
/// layers that stay above the noise floor. Standard error by leave-one-out
/// jackknife over seeds.
inline RateEstimate empirical_chi(const NetworkSpec& net_spec, const QuantizedActivation& act,
                                  std::pair<double, double> c0_window, int n_seeds) {
    if (n_seeds < 2) throw std::domain_error("empirical_chi: n_seeds must be >= 2");
    const auto report = analyze(act, net_spec.hp);
    const double c_star = report.c_star;
    const double q_hat_eff = report.q_hat_star + report.mu_star * report.mu_star;
    const double c0s[2] = {c0_window.first, c0_window.second};
    for (double c0 : c0s) {
        if (!(std::abs(c0) < 1.0)) throw std::domain_error("empirical_chi: |c0| must be < 1");
        if (std::abs(c0 - c_star) < 1e-6)
            throw EstimationError("empirical_chi: initial correlation equals C*; slope undefined");
    }
    const int n0 = net_spec.input_dim;
    const int L = net_spec.depth;
    // Per seed, per layer, per probe: deviation of the empirical correlation
    // from C*.
    std::vector<Eigen::MatrixXd> eps(n_seeds);
    std::vector<std::uint64_t> seeds(n_seeds);
    for (int s = 0; s < n_seeds; ++s) seeds[s] = net_spec.seed + static_cast<std::uint64_t>(s);
    parallel_for(n_seeds, [&](std::size_t s) {
        NetworkSpec spec(net_spec.input_dim, net_spec.width, net_spec.depth, net_spec.hp,
                         seeds[s]);
        Network net(spec);
        const CounterRng rng(spec.seed, detail::kStreamManifold);
        Eigen::VectorXd u0(n0), u1(n0);
        for (int i = 0; i < n0; ++i) {
            u0(i) = rng.normal(2 * static_cast<std::uint64_t>(i));
            u1(i) = rng.normal(2 * static_cast<std::uint64_t>(i) + 1);
        }
        u0.normalize();
        u1 -= u0 * u0.dot(u1);
        u1.normalize();
        const double scale = std::sqrt(n0 * q_hat_eff);
        Eigen::MatrixXd X(n0, 3);
        X.col(0) = scale * u0;
        for (int k = 0; k < 2; ++k)
            X.col(k + 1) = scale * (c0s[k] * u0 + std::sqrt(1.0 - c0s[k] * c0s[k]) * u1);
        Eigen::MatrixXd dev(L, 2);
        Eigen::MatrixXd post = X;
        for (int l = 1; l <= L; ++l) {
            Eigen::MatrixXd pre = net.weight(l) * post;
            if (spec.hp.sigma_b2 != 0.0) pre.colwise() += net.bias(l);
            Eigen::MatrixXd gram = pre.transpose() * pre / static_cast<double>(spec.width);
            for (int k = 0; k < 2; ++k)
                dev(l - 1, k) =
                    gram(0, k + 1) / std::sqrt(gram(0, 0) * gram(k + 1, k + 1)) - c_star;
            if (l < L) {
                post.resize(pre.rows(), pre.cols());
                for (Eigen::Index j = 0; j < pre.cols(); ++j)
                    for (Eigen::Index i = 0; i < pre.rows(); ++i) post(i, j) = act.eval(pre(i, j));
            }
        }
        eps[s] = dev;
    });
    // Ratio estimator on the seed-averaged trajectories; usable layers are
    // those above the averaged sampling noise.
    const double noise_floor =
        3.0 / std::sqrt(static_cast<double>(net_spec.width) * n_seeds);
    const auto slope_of = [&](const Eigen::MatrixXd& avg, int& used) -> double {
        double num = 0.0, den = 0.0;
        used = 0;
        for (int k = 0; k < 2; ++k) {
            for (int l = 0; l + 1 < L; ++l) {
                if (std::abs(avg(l, k)) > noise_floor && std::abs(avg(l + 1, k)) > noise_floor) {
                    num += avg(l + 1, k) * avg(l, k);
                    den += avg(l, k) * avg(l, k);
                    ++used;
                }
            }
        }
        if (used < 3 || den == 0.0)
            throw EstimationError("empirical_chi: too few layers in the linear regime");
        return num / den;
    };
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(L, 2);
    for (const auto& e : eps) avg += e;
    avg /= n_seeds;
    RateEstimate out;
    out.seeds = n_seeds;
    out.estimate = slope_of(avg, out.layers_used);
    std::vector<double> jack(n_seeds);
    for (int s = 0; s < n_seeds; ++s) {
        Eigen::MatrixXd rest = (avg * n_seeds - eps[s]) / (n_seeds - 1);
        int used_unused;
        jack[s] = slope_of(rest, used_unused);
    }
    double jmean = 0.0;
    for (double v : jack) jmean += v;
    jmean /= n_seeds;
    double var = 0.0;
    for (double v : jack) var += (v - jmean) * (v - jmean);
    out.std_error = std::sqrt(var * (n_seeds - 1) / static_cast<double>(n_seeds));
    return out;
}

struct MomentEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double closed_form = 0.0;  // sigma_w^2 rho^2 erf(clip / sqrt(2 Q*))
};

/// Monte Carlo first moment of J J^T for the STE state-to-state Jacobian
/// D_ste(u) W with u ~ N(0, Q* I): (1/n) tr(J J^T) averaged over seeds.
inline MomentEstimate jacobian_moment_mc(const NetworkSpec& net_spec,
                                         const QuantizedActivation& act, const SteSurrogate& ste,
                                         int n_seeds) {
    if (n_seeds < 2) throw std::domain_error("jacobian_moment_mc: n_seeds must be >= 2");
    const double q_star = solve_q_star(act, net_spec.hp).q_star;
    const int n = net_spec.width;
    std::vector<double> vals(n_seeds, 0.0);
    parallel_for(n_seeds, [&](std::size_t s) {
        const CounterRng wrng(net_spec.seed + s, detail::kStreamJacobian);
        const CounterRng urng(net_spec.seed + s, detail::kStreamJacobian + 1);
        const double sd = std::sqrt(net_spec.hp.sigma_w2 / n);
        const double sq = std::sqrt(q_star);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double di = ste.derivative(sq * urng.normal(i));
            if (di == 0.0) continue;
            double row = 0.0;
            const std::uint64_t base = static_cast<std::uint64_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double w = sd * wrng.normal(base + j);
                row += w * w;
            }
            acc += di * di * row;
        }
        vals[s] = acc / n;
    });
    MomentEstimate out;
    for (double v : vals) out.estimate += v;
    out.estimate /= n_seeds;
    double var = 0.0;
    for (double v : vals) var += (v - out.estimate) * (v - out.estimate);
    out.std_error = std::sqrt(var / (n_seeds - 1.0) / n_seeds);
    out.closed_form = net_spec.hp.sigma_w2 * ste.rho * ste.rho *
                      std::erf(ste.clip / std::sqrt(2.0 * q_star));
    return out;
}

}  // namespace qprop
