#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tfa {

using Rng = std::mt19937_64;

/// splitmix64 step; used to derive independent child seeds from a base seed
/// so that parallel units (episodes, parameters, rollouts) get decorrelated
/// streams deterministically.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(base + 0x632be59bd9b4e019ull * (stream + 1));
}

/// Uniform double in [0, 1). Implemented directly on the engine output so the
/// stream does not depend on the standard library's distribution internals.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via polar Box-Muller (no cached spare, so consumption is
/// easy to reason about when replaying seeds).
inline double gaussian(Rng& rng) {
  for (;;) {
    double u = 2.0 * uniform01(rng) - 1.0;
    double v = 2.0 * uniform01(rng) - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

inline int uniform_int(Rng& rng, int n) {
  // n is small everywhere this is used; modulo bias is negligible but cheap
  // to avoid with rejection.
  std::uint64_t limit = ~0ull - ~0ull % static_cast<std::uint64_t>(n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<int>(x % static_cast<std::uint64_t>(n));
}

}  // namespace tfa
