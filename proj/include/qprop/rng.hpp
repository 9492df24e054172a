#pragma once

// Counter-based random numbers: Philox4x64-10 keyed by (seed, stream) and
// addressed by index, so any draw can be produced independently of order or
// thread count. Normals come from the Wichura AS241 inverse-cdf, accurate to
// ~1e-16 relative, keeping the stream platform-independent.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qprop {

namespace detail {

inline constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ULL;
inline constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ULL;
inline constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void philox_round(std::array<std::uint64_t, 4>& ctr, std::uint64_t k0, std::uint64_t k1) {
    const unsigned __int128 p0 = static_cast<unsigned __int128>(kPhiloxM0) * ctr[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(kPhiloxM1) * ctr[2];
    const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
    const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

}  // namespace detail

/// Philox4x64-10 block function: 4 words of counter, 2 of key -> 4 words.
inline std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                               std::uint64_t key0, std::uint64_t key1) {
    for (int r = 0; r < 10; ++r) {
        detail::philox_round(counter, key0, key1);
        key0 += detail::kWeyl0;
        key1 += detail::kWeyl1;
    }
    return counter;
}

/// Inverse standard normal cdf (Wichura's AS241, PPND16).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must be in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

/// Keyed, index-addressable stream of uniforms and normals. Pure functions
/// of (seed, stream, index): any element can be generated in any order on
/// any thread with the same result.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    /// Uniform on (0, 1), 53-bit resolution, never exactly 0 or 1.
    double uniform(std::uint64_t index) const {
        return to_unit(word(index));
    }

    /// Standard normal by inverse cdf.
    double normal(std::uint64_t index) const {
        return inverse_normal_cdf(uniform(index));
    }

    std::uint64_t word(std::uint64_t index) const {
        const auto block = philox4x64({index >> 2, stream_, 0, 0}, seed_, stream_);
        return block[index & 3];
    }

private:
    static double to_unit(std::uint64_t x) {
        // Top 53 bits, offset by half an ulp to stay inside (0, 1).
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
};

}  // namespace qprop
