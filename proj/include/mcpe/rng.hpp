#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mcpe {

// SplitMix64 finalizer; used only to derive stream ids, never as the generator.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Identifies one reproducible random sequence.
///
/// The generator behind a stream is std::mt19937_64 seeded through
/// std::seed_seq with the words {seed.lo, seed.hi, stream.lo, stream.hi}.
/// Both algorithms are fixed by the C++ standard, and every derived draw
/// (uniform doubles, bounded integers, normals) is computed here rather
/// than by <random> distributions, so a (seed, stream) pair yields the
/// same draws on every conforming platform.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// A stream independent of this one, keyed by `tag`.
    constexpr RngStream substream(std::uint64_t tag) const noexcept {
        return {seed, mix64(stream ^ mix64(tag + 0x51ed270b27a3c1f5ULL))};
    }

    friend constexpr bool operator==(const RngStream&, const RngStream&) = default;
};

/// Owning generator for one RngStream. Not thread-safe; one per consumer.
class Rng {
public:
    explicit Rng(RngStream id) : engine_(make_engine(id)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal via the Box-Muller transform (one value per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::mt19937_64 make_engine(RngStream id) {
        std::seed_seq seq{static_cast<std::uint32_t>(id.seed), static_cast<std::uint32_t>(id.seed >> 32),
                          static_cast<std::uint32_t>(id.stream), static_cast<std::uint32_t>(id.stream >> 32)};
        return std::mt19937_64(seq);
    }

    std::mt19937_64 engine_;
};

} // namespace mcpe
