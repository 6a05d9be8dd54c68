#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ksl {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text);

// 64-bit seed for the unit (label, i, j) of a run seeded with seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t i = 0, std::uint64_t j = 0);

// Independent generator for one logical stream. The label names the call
// site and (i, j) index the unit of work, so the draws a unit sees do not
// depend on which thread runs it or in what order.
std::mt19937_64 make_stream(std::uint64_t seed, std::string_view label,
                            std::uint64_t i = 0, std::uint64_t j = 0);

}  // namespace ksl
