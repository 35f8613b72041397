#pragma once

// Pinned random number generation. Every stochastic routine in the library
// draws from Rng below, so a seed reproduces results bit-for-bit within one
// build regardless of the standard library in use.
//
//   bits:     xoshiro256** (Blackman & Vigna), state filled by splitmix64
//   uniform:  top 53 bits scaled by 2^-53, in [0, 1)
//   normal:   Marsaglia polar method, second variate cached
//   gamma:    Marsaglia & Tsang squeeze; shape < 1 via the U^(1/a) boost
//   poisson:  multiplication method below mean 10, PTRS (Hormann) above
//
// Independent streams: stream i of master seed s is seeded from
// splitmix64(splitmix64(s) ^ splitmix64(i + 0x632BE59BD9B4E019)).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mmcpd {

namespace detail {

inline constexpr std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
    std::uint64_t s = x;
    return splitmix64_next(s);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0x5EEDULL) noexcept { reseed(seed); }

    /// Generator for replication `index` of a run seeded with `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t index) noexcept {
        return Rng(detail::splitmix64_mix(detail::splitmix64_mix(seed) ^
                                          detail::splitmix64_mix(index + 0x632BE59BD9B4E019ULL)));
    }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = detail::splitmix64_next(sm);
        has_spare_ = false;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Exponential with rate 1.
    double exponential() noexcept { return -std::log(uniform_open()); }

    /// Gamma with the given shape and rate 1.
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            const double boost = std::pow(uniform_open(), 1.0 / shape);
            return gamma(shape + 1.0) * boost;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::uint64_t poisson(double mean) noexcept {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform_open();
            while (prod > limit) {
                ++k;
                prod *= uniform_open();
            }
            return k;
        }
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_open();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0)) {
                return static_cast<std::uint64_t>(k);
            }
        }
    }

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mmcpd
