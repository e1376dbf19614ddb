#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace massext {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed of the substream keyed by (master seed, command tag, row, replica).
///
/// Each key component passes through its own splitmix64 round before being
/// folded in, so the map is a keyed hash rather than a sequential offset and
/// neighbouring keys produce unrelated seeds. No global generator state is
/// involved: any replica can be regenerated in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                    std::uint64_t row, std::uint64_t replica) noexcept {
  std::uint64_t h = detail::splitmix64(master);
  h = detail::splitmix64(h ^ detail::fnv1a(tag));
  h = detail::splitmix64(h ^ detail::splitmix64(row + 0x632be59bd9b4e019ULL));
  h = detail::splitmix64(h ^ detail::splitmix64(replica + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

inline double sample_exponential(Rng& rng, double rate) {
  return std::exponential_distribution<double>{rate}(rng);
}

}  // namespace massext
