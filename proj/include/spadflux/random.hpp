#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace spadflux {

/// Engine used for every randomized routine in the library.
///
/// mt19937_64 is fully specified by the C++ standard, and all distributions
/// are taken from Boost.Random, so sampled values do not depend on the
/// standard library vendor.
using RandomStream = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the stream identified by `master` and a path of indices, e.g.
/// (grid point, trial). Folding is order sensitive: (1, 2) != (2, 1).
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t k : path) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline RandomStream make_stream(std::uint64_t master,
                                std::initializer_list<std::uint64_t> path = {}) {
  return RandomStream(derive_seed(master, path));
}

}  // namespace spadflux
