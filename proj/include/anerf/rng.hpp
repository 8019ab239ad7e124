#pragma once

#include <cstdint>
#include <span>

namespace anerf {

// splitmix64 finalizer, used to turn arbitrary ids into well-mixed seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// PCG32. Small state so per-ray streams are cheap to construct.
class Rng {
public:
    Rng(uint64_t seed, uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += mix64(seed);
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // uniform in [0, 1)
    float next_float() { return static_cast<float>(next_u32() >> 8) * 0x1p-24f; }
    double next_double() { return static_cast<double>(next_u32()) * 0x1p-32; }

    // uniform in [0, n)
    uint32_t next_below(uint32_t n) { return static_cast<uint32_t>((uint64_t(next_u32()) * n) >> 32); }

private:
    uint64_t state_;
    uint64_t inc_;
};

// Stream ids shared by renderer and trainer so that different pipelines
// draw identical randomness for the same (seed, ray) pair.
enum : uint64_t {
    kStreamCoarseJitter = 1,
    kStreamFineU = 2,
    kStreamShuffle = 3,
};

// Per-ray generator derived from (global seed, ray id, stream, round).
// Round distinguishes training iterations; renders use round = 0.
inline Rng make_ray_rng(uint64_t seed, uint64_t ray_id, uint64_t stream, uint64_t round = 0) {
    uint64_t s = hash_combine(hash_combine(seed, ray_id), round);
    return Rng(s, stream);
}

// Deterministic Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void shuffle_in_place(std::span<T> items, Rng& rng) {
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = rng.next_below(static_cast<uint32_t>(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace anerf
