#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cached_dfl {

using Rng = std::mt19937_64;

/// Tags that separate the independent random streams of one run.
enum class Stream : std::uint64_t {
    placement = 1,
    mobility = 2,
    training = 3,
    partition = 4,
    dataset = 5,
    evaluation = 6,
    init = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives a seed for the stream identified by (seed, stream, keys...).
/// Distinct key tuples give statistically independent generators, so the
/// order in which streams are created or consumed never matters.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::initializer_list<std::uint64_t> keys = {}) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC908ULL);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    for (std::uint64_t k : keys) {
        h = splitmix64(h ^ k);
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed, Stream stream,
                    std::initializer_list<std::uint64_t> keys = {}) {
    return Rng(derive_seed(seed, stream, keys));
}

}  // namespace cached_dfl
