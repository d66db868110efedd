#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace embnav {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

/// Seed-splitting rule shared by every stage:
///   derive_seed(m, s, i) = splitmix64(splitmix64(m ^ fnv1a64(s)) + i)
/// so stage seeds are independent of how many other stages ran before.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t index);

}  // namespace embnav
