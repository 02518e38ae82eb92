#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace evo {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a master seed and a key path,
/// e.g. derive_seed(seed, {replicate}) or derive_seed(seed, {t, snp, r}).
/// The result depends only on its arguments, so per-item streams give the
/// same numbers regardless of execution order or thread count.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = mix64(seed);
    for (auto k : keys) {
        h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(seed, keys));
}

// Stream tags keep the substreams of different pipeline stages apart.
namespace stream {
inline constexpr std::uint64_t kStartFrequencies = 1;
inline constexpr std::uint64_t kLdNoise = 2;
inline constexpr std::uint64_t kTargets = 3;
inline constexpr std::uint64_t kReplicate = 4;
inline constexpr std::uint64_t kPoolSeq = 5;
inline constexpr std::uint64_t kWrightFisher = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kShuffle = 8;
inline constexpr std::uint64_t kEpsilon = 9;
inline constexpr std::uint64_t kRollout = 10;
inline constexpr std::uint64_t kCohort = 11;
inline constexpr std::uint64_t kBootstrap = 12;
}  // namespace stream

}  // namespace evo
