#pragma once

#include <cstdint>

namespace cslm {

// Deterministic counter-based generator (splitmix64). The same seed yields
// the same sequence on every platform; split() derives an independent
// stream without advancing the parent.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // integer in [0, n)
    uint64_t next_below(uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    Rng split(uint64_t stream) const {
        uint64_t z = state_ ^ (0xD1B54A32D192ED03ull * (stream + 1));
        z = (z ^ (z >> 29)) * 0xFF51AFD7ED558CCDull;
        z = (z ^ (z >> 32)) * 0xC4CEB9FE1A85EC53ull;
        return Rng(z ^ (z >> 29));
    }

private:
    uint64_t state_;
};

} // namespace cslm
