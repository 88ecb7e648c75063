#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

namespace segmix {

// Deterministic, platform-independent random number machinery. Every
// randomized stage derives its own seed from the run seed plus a stream tag
// and its coordinates, so results do not depend on evaluation order,
// parallel schedule, or the standard library's distribution internals.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream tags, one per randomized stage.
namespace stream {
inline constexpr uint64_t kMask = 0x6d61736bULL;        // dataset masking
inline constexpr uint64_t kEmRestart = 0x656d5f72ULL;   // EM restart init
inline constexpr uint64_t kCvFolds = 0x63766b66ULL;     // CV fold shuffle
inline constexpr uint64_t kCvFit = 0x63766674ULL;       // CV per-fold refits
inline constexpr uint64_t kHoldout = 0x686f6c64ULL;     // holdout fold shuffle
inline constexpr uint64_t kPlanted = 0x706c6e74ULL;     // synthetic generator
inline constexpr uint64_t kTable = 0x7461626cULL;       // score-table stages
}  // namespace stream

// Absorbs a tuple of words into a single well-mixed 64-bit seed.
inline uint64_t derive_seed(std::initializer_list<uint64_t> words) {
    uint64_t state = 0x853c49e6748fea9bULL;
    for (uint64_t w : words) {
        uint64_t h = w;
        state ^= splitmix64(h);
        (void)splitmix64(state);
        state = splitmix64(state);
    }
    return state;
}

// xoshiro256** seeded via splitmix64.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        for (auto& word : s_) word = splitmix64(seed);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased (rejection).
    uint64_t next_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Exp(1); used for Dirichlet(1,...,1) simplex draws.
    double next_exponential() { return -std::log1p(-next_double()); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace segmix
