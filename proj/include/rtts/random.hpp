#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rtts {

/// Unbiased draw from [0, bound) by rejection sampling, so sequences are
/// identical across standard library implementations.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound);

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<size_t> seeded_permutation(size_t n, uint64_t seed);

}  // namespace rtts
