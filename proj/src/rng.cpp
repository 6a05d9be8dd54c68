#include "ksl/rng.hpp"

namespace ksl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t i, std::uint64_t j) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ fnv1a(label));
  s = splitmix64(s ^ i);
  return splitmix64(s ^ (j * 0xd6e8feb86659fd93ULL));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::string_view label,
                            std::uint64_t i, std::uint64_t j) {
  const std::uint64_t s = derive_seed(seed, label, i, j);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace ksl
