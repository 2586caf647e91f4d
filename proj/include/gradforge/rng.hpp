#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gradforge {

/// Generator recorded in model-file headers. Seeds reproduce across any
/// implementation of this format as long as the name matches.
inline constexpr std::string_view kGeneratorName = "pcg32";

/// PCG32 (Melissa O'Neill's pcg32_random_r): 64-bit state, output 32 bits,
/// stream selected by the odd increment. All higher-level draws (bounded
/// ints, uniform doubles, normals) are built on next_u32 with fixed
/// algorithms, so a (seed, stream) pair pins every random decision made by
/// the library.
class Pcg32 {
public:
    Pcg32(std::uint64_t seed, std::uint64_t stream) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += mix(seed);
        next_u32();
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const std::uint32_t xorshifted =
            static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by rejection; unbiased.
    std::uint32_t uniform_below(std::uint32_t bound) {
        const std::uint32_t threshold = static_cast<std::uint32_t>(-bound) % bound;
        for (;;) {
            const std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    bool bernoulli(double p) { return uniform_double() < p; }

    /// Standard normal via the Marsaglia polar method; one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform_double() - 1.0;
            v = 2.0 * uniform_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    // splitmix64 finalizer; spreads low-entropy seeds over the state space.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// One independent stream per consumer of randomness, so e.g. changing how
/// dropout draws masks cannot perturb the sampling sequence.
enum class RngStream : std::uint64_t {
    ParamInit = 1,
    Sampling = 2,
    Shuffle = 3,
    Dropout = 4,
    DataSplit = 5,
};

inline Pcg32 make_rng(std::uint64_t seed, RngStream stream) {
    return Pcg32(seed, static_cast<std::uint64_t>(stream));
}

} // namespace gradforge
