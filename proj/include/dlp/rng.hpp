#pragma once

#include <cstdint>
#include <random>

namespace dlp {

// splitmix64; used for seed derivation and hashing small keys.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x6a09e667f3bcc909ULL));
}

// Deterministic RNG with fully specified output mapping. std::mt19937_64 has
// a portable bit stream; the distributions below avoid std::uniform_*_distribution,
// whose mapping is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed), base_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, n), n > 0. Rejection sampling on the top of the range.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform_real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

    bool bernoulli(double p) { return uniform_real() < p; }

    // Child stream seeded from the construction seed, independent of draws made so far.
    Rng fork(std::uint64_t stream) const { return Rng(derive_seed(base_, stream)); }

private:
    std::mt19937_64 gen_;
    std::uint64_t base_ = 0;
};

// FNV-1a over bytes; used for config digests and file digests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace dlp
