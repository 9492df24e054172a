#pragma once

// Staircase (quantized) activations: base value A, ordered offsets g_i and
// positive step heights h_i, evaluating to A + sum_{g_i <= x} h_i with the
// right-continuous Heaviside convention H(0) = 1.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace qprop {

class QuantizedActivation {
public:
    /// Builds a staircase from (possibly unsorted) offsets and heights.
    /// Coincident offsets are merged by summing their heights.
    QuantizedActivation(double base, std::vector<double> offsets, std::vector<double> heights)
        : base_(base) {
        if (offsets.size() != heights.size())
            throw std::domain_error("QuantizedActivation: offsets/heights size mismatch");
        if (offsets.empty())
            throw std::domain_error("QuantizedActivation: at least one offset required");
        for (std::size_t i = 0; i < heights.size(); ++i) {
            if (!std::isfinite(offsets[i]))
                throw std::domain_error("QuantizedActivation: non-finite offset");
            if (!(heights[i] > 0.0))
                throw std::domain_error("QuantizedActivation: heights must be > 0");
        }
        std::vector<std::size_t> order(offsets.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return offsets[a] < offsets[b]; });
        for (std::size_t k : order) {
            if (!offsets_.empty() && offsets[k] == offsets_.back()) {
                heights_.back() += heights[k];
            } else {
                offsets_.push_back(offsets[k]);
                heights_.push_back(heights[k]);
            }
        }
        prefix_.resize(offsets_.size() + 1);
        prefix_[0] = base_;
        for (std::size_t i = 0; i < offsets_.size(); ++i)
            prefix_[i + 1] = prefix_[i] + heights_[i];
    }

    double base() const { return base_; }
    const std::vector<double>& offsets() const { return offsets_; }
    const std::vector<double>& heights() const { return heights_; }

    /// Number of output states (= #offsets + 1 after merging).
    int num_states() const { return static_cast<int>(offsets_.size()) + 1; }

    double min_state() const { return prefix_.front(); }
    double max_state() const { return prefix_.back(); }

    /// A + sum_{g_i <= x} h_i. Right-continuous at the offsets.
    double eval(double x) const {
        if (!std::isfinite(x)) throw std::domain_error("QuantizedActivation::eval: non-finite x");
        const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), x);
        return prefix_[static_cast<std::size_t>(it - offsets_.begin())];
    }

    double operator()(double x) const { return eval(x); }

    /// Offsets divided by sqrt(q_star).
    std::vector<double> normalized_offsets(double q_star) const {
        if (!(q_star > 0.0))
            throw std::domain_error("normalized_offsets: q_star must be > 0");
        std::vector<double> out(offsets_.size());
        const double inv = 1.0 / std::sqrt(q_star);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = offsets_[i] * inv;
        return out;
    }

    /// True when eval(-x) == -eval(x) away from the offsets: the offset set
    /// is symmetric with matching (reversed) heights and the base equals
    /// minus half the total rise.
    bool is_odd(double tol = 1e-12) const {
        const double total = prefix_.back() - prefix_.front();
        const double scale = std::max(1.0, std::abs(total));
        if (std::abs(base_ + 0.5 * total) > tol * scale) return false;
        const std::size_t m = offsets_.size();
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = m - 1 - i;
            if (std::abs(offsets_[i] + offsets_[j]) >
                tol * std::max(1.0, std::abs(offsets_[i])))
                return false;
            if (std::abs(heights_[i] - heights_[j]) > tol * std::max(1.0, heights_[i]))
                return false;
        }
        return true;
    }

private:
    double base_;
    std::vector<double> offsets_;
    std::vector<double> heights_;
    std::vector<double> prefix_;  // cumulative state values; prefix_[k] = A + sum h_{<k}
};

/// sign(x) with sign(0) = +1: base -1, a single step of height 2 at 0.
inline QuantizedActivation make_sign() {
    return QuantizedActivation(-1.0, {0.0}, {2.0});
}

/// Evenly spaced staircase with states exactly spanning [-1, 1]:
/// heights 2/(N-1), offsets (2/(N-1)) (i - N/2) for i = 1..N-1.
inline QuantizedActivation make_constant_spaced(int n_states) {
    if (n_states < 2) throw std::domain_error("make_constant_spaced: n_states must be >= 2");
    const double d = 2.0 / (n_states - 1);
    std::vector<double> g(n_states - 1), h(n_states - 1, d);
    for (int i = 1; i < n_states; ++i) g[i - 1] = d * (i - n_states / 2.0);
    return QuantizedActivation(-1.0, std::move(g), std::move(h));
}

/// Linear-spacing family: offsets d0 * m * (1 + d1 |m|) with m = i - N/2,
/// constant heights. d1 = 0 reproduces the constant-spaced offsets scaled
/// by d0 (N-1)/2; d1 > 0 widens the spacing away from the center.
inline QuantizedActivation make_linear_spaced(int n_states, double d0, double d1) {
    if (n_states < 2) throw std::domain_error("make_linear_spaced: n_states must be >= 2");
    if (!(d0 > 0.0)) throw std::domain_error("make_linear_spaced: d0 must be > 0");
    std::vector<double> g(n_states - 1);
    for (int i = 1; i < n_states; ++i) {
        const double m = i - n_states / 2.0;
        g[i - 1] = d0 * m * (1.0 + d1 * std::abs(m));
    }
    for (int i = 1; i < n_states - 1; ++i) {
        if (!(g[i] > g[i - 1]))
            throw std::domain_error("make_linear_spaced: offsets not increasing at index " +
                                    std::to_string(i));
    }
    return QuantizedActivation(-1.0, std::move(g),
                               std::vector<double>(n_states - 1, 2.0 / (n_states - 1)));
}

/// Straight-through estimator surrogate: derivative rho on |x| < clip, else 0.
struct SteSurrogate {
    double rho = 1.0;
    double clip = 1.0;

    SteSurrogate() = default;
    explicit SteSurrogate(double rho, double clip = 1.0) : rho(rho), clip(clip) {
        if (!(rho > 0.0)) throw std::domain_error("SteSurrogate: rho must be > 0");
        if (!(clip > 0.0)) throw std::domain_error("SteSurrogate: clip must be > 0");
    }

    double derivative(double x) const { return std::abs(x) < clip ? rho : 0.0; }
};

}  // namespace qprop
