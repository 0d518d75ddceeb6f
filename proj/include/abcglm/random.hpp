#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "abcglm/errors.hpp"
#include "abcglm/numerics.hpp"

namespace abcglm {

namespace detail {

// SplitMix64 finalizer; used only to spread seeds and stream tags.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Philox4x32-10 block function. Counter-based: the output is a pure
// function of (counter, key), so any (stream, block) pair can be generated
// out of order and still reproduce bit-identically.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

}  // namespace detail

/// Derives an independent sub-seed from (seed, tag); chains are fine.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return detail::mix64(seed ^ detail::mix64(tag));
}

/// Counter-based random stream. A stream is addressed by (seed, stream id);
/// proposal i of a run owns stream i, so results do not depend on scheduling
/// or worker count. Satisfies UniformRandomBitGenerator.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (phase_ == 0) refill();
        const int i = 2 * (2 - phase_);
        phase_ -= 1;
        return (static_cast<std::uint64_t>(buf_[i + 1]) << 32) | buf_[i];
    }

    /// Strictly inside (0,1); safe to feed to log().
    double uniform01() {
        const std::uint64_t bits = (*this)() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double exponential(double rate) {
        if (!(rate > 0.0)) throw ValidationError("exponential: rate must be positive");
        return -std::log(uniform01()) / rate;
    }

    /// Standard normal via Box-Muller (two uniforms per call, no cache).
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Exact Poisson draw: sequential inversion for small means, Hormann's
    /// PTRS transformed rejection for large ones.
    long poisson(double mean) {
        if (!(mean >= 0.0)) throw ValidationError("poisson: mean must be non-negative");
        if (mean == 0.0) return 0;
        if (mean < 10.0) return poisson_inversion(mean);
        return poisson_ptrs(mean);
    }

private:
    void refill() {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        buf_ = detail::Philox4x32::block(ctr, key_);
        block_ += 1;
        phase_ = 2;
    }

    long poisson_inversion(double mean) {
        const double p0 = std::exp(-mean);
        double u = uniform01();
        long k = 0;
        double p = p0;
        double cdf = p0;
        while (u > cdf) {
            k += 1;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (k > 2000) break;  // cdf numerically saturated
        }
        return k;
    }

    long poisson_ptrs(double mean) {
        const double smu = std::sqrt(mean);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mu = std::log(mean);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            const double k = kf;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_mu - mean - std::lgamma(k + 1.0))
                return static_cast<long>(kf);
        }
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    int phase_ = 0;
    std::array<std::uint32_t, 4> buf_{};
};

}  // namespace abcglm
