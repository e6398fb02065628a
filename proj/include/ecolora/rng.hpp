// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ecolora {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a tag path,
/// e.g. derive_seed(seed, {kSampling, round}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = splitmix64(master);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
    return h;
}

// Portable helpers built on raw engine output; std distributions are
// implementation-defined and would break cross-platform golden files.

inline double uniform01(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection, bound > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

namespace seed_tags {
inline constexpr std::uint64_t kModel = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kSampling = 4;
inline constexpr std::uint64_t kShuffle = 5;
}  // namespace seed_tags

}  // namespace ecolora
