#pragma once

#include <cmath>
#include <cstdint>

namespace loopkit {

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so parallel consumers can draw independent
// streams with no shared state and results never depend on scheduling.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic random stream identified by (seed, stream id).
/// Successive calls advance a counter; the i-th draw of a given stream
/// is the same regardless of what other streams were used in between.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream)
        : state_(detail::splitmix64(detail::splitmix64(seed) ^ (stream * 0xd1342543de82ef95ull))) {}

    std::uint64_t next_u64() {
        counter_ += 1;
        return detail::splitmix64(state_ ^ (counter_ * 0x2545f4914f6cdd1dull));
    }

    /// Uniform integer in [0, bound). Lemire rejection; unbiased.
    std::uint32_t next_bounded(std::uint32_t bound) {
        while (true) {
            std::uint64_t x = next_u64() >> 32;
            __uint128_t m = static_cast<__uint128_t>(x) * bound;
            auto lo = static_cast<std::uint64_t>(m & 0xffffffffull);
            if (lo >= bound || lo >= (0x100000000ull % bound)) {
                return static_cast<std::uint32_t>(m >> 32);
            }
        }
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller (independent of platform libstdc++).
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace loopkit
