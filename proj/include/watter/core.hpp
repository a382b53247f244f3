#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace watter {

// All simulation clocks and durations are integer milliseconds. File formats
// and reports speak seconds; the conversion happens at the I/O boundary.
using TimeMs = std::int64_t;
using DurMs = std::int64_t;

using OrderId = std::int32_t;
using WorkerId = std::int32_t;
using NodeId = std::int32_t;

constexpr TimeMs kNeverMs = std::numeric_limits<TimeMs>::max();

inline constexpr DurMs seconds_to_ms(double s) {
    return static_cast<DurMs>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5));
}

inline constexpr double ms_to_seconds(DurMs ms) { return static_cast<double>(ms) / 1000.0; }

class UnreachableError : public std::runtime_error {
public:
    explicit UnreachableError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic xoshiro-free PRNG kit: std::mt19937_64 for the stream, plus
// hand-rolled draw helpers so results do not depend on the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed)), inc_(splitmix(seed ^ 0x9e3779b97f4a7c15ull) | 1ull) {}

    std::uint64_t next_u64() {
        // xorshift128+ style step on two splitmix-derived words
        std::uint64_t x = state_;
        std::uint64_t y = inc_;
        state_ = y;
        x ^= x << 23;
        inc_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return inc_ + y;
    }

    // uniform integer in [0, bound), bound > 0
    std::uint64_t next_below(std::uint64_t bound) {
        // rejection sampling keeps the draw unbiased
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {  // inclusive range
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double next_double() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool next_bool(double p_true) { return next_double() < p_true; }

private:
    static std::uint64_t splitmix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    std::uint64_t inc_;
};

}  // namespace watter
