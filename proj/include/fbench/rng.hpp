#pragma once

// Counter-based deterministic randomness. Draws depend only on an explicit
// key, never on call order or machine state, so any consumer can reproduce a
// sampling decision from (seed, stream ids) alone.

#include <cstdint>

namespace fbench {

// splitmix64 finalizer; bijective 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// PRF over a counter. Two streams with different keys are independent for
// every practical purpose; the same key always replays the same sequence.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b = 0)
        : key_(mix64(mix64(mix64(seed) + stream_a) + stream_b)) {}

    std::uint64_t next() { return mix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    // Uniform draw in [0, bound) by 128-bit multiply with rejection, so no
    // modulo bias for any bound.
    std::uint64_t bounded(std::uint64_t bound) {
        for (;;) {
            const std::uint64_t x = next();
            const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
            const auto low = static_cast<std::uint64_t>(m);
            if (low < bound) {
                const std::uint64_t cutoff = (0 - bound) % bound;
                if (low < cutoff) continue;
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace fbench
