#pragma once

#include <cstdint>
#include <random>

namespace mlrel {

// SplitMix64 finalizer; used to derive independent RNG streams from a master
// seed plus stream coordinates, so results never depend on thread schedule.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(mix64(master) ^ tag) ^ index);
}

// Stream tags. Distinct purposes never share a stream.
namespace stream {
inline constexpr std::uint64_t empty_vote = 0x1001;
inline constexpr std::uint64_t smc = 0x1002;
inline constexpr std::uint64_t bootstrap = 0x1003;
inline constexpr std::uint64_t ball_draw = 0x1004;
inline constexpr std::uint64_t cv_folds = 0x1005;
inline constexpr std::uint64_t mixture = 0x1006;
}  // namespace stream

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    return Rng(derive_seed(master, tag, index));
}

// Uniform in [0,1) from the top 53 bits; independent of the standard
// library's distribution implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % n;
}

}  // namespace mlrel
