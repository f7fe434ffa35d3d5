#pragma once

#include <cstdint>
#include <random>

#include "cablecal/types.hpp"

namespace cablecal {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 uniform_direction(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

/// Random direction scaled by a magnitude uniform in [0, max].
inline Vec3 bounded_displacement(Rng& rng, double max) {
  if (max <= 0.0) return Vec3::Zero();
  const Vec3 d = uniform_direction(rng);
  return d * uniform(rng, 0.0, max);
}

}  // namespace cablecal
