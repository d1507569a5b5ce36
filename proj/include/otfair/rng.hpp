#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace otfair {

// splitmix64 step (Vigna). Used to whiten seeds and to derive independent
// stream seeds from a (base seed, tag...) tuple.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic, portable xoshiro256++ generator. We avoid <random>
// distributions on purpose: their output is implementation-defined, and every
// consumer of randomness here must be reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Standard normal via Box-Muller (two draws per call, no cached spare).
    double normal() {
        double u1 = unit();
        while (u1 == 0.0) u1 = unit();
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    bool bernoulli_half() { return (next_u64() >> 63) != 0; }

    // Uniform integer in [0, n) via Lemire's multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

// Derives the seed of a named sub-stream. Streams for distinct tag tuples are
// independent for all practical purposes; the same tuple always yields the
// same stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= tag;
    return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1,
                                 std::uint64_t tag2) {
    return derive_seed(derive_seed(base, tag1), tag2);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1,
                                 std::uint64_t tag2, std::uint64_t tag3) {
    return derive_seed(derive_seed(base, tag1, tag2), tag3);
}

// Stream tags. Kept in one place so no two purposes ever share a stream.
namespace stream {
inline constexpr std::uint64_t kFoldSplit = 0x464f4c44;   // per-cell fold split
inline constexpr std::uint64_t kTrainData = 0x545241494e; // synthetic train draw
inline constexpr std::uint64_t kTestData = 0x54455354;    // synthetic test draw
inline constexpr std::uint64_t kProxyNoise = 0x564e4f49;  // proxy perturbation
}  // namespace stream

}  // namespace otfair
