#ifndef MOLRL_RNG_HPP
#define MOLRL_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace molrl {

using Rng = std::mt19937_64;

// splitmix64 mixing step; also used as the pinned fingerprint hash.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// Multinomial draw from unnormalized nonnegative weights.
inline std::size_t sample_index(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    r -= w[i];
    if (r <= 0.0) return i;
  }
  return w.size() - 1;
}

}  // namespace molrl

#endif
