#pragma once

#include <cstdint>
#include <random>

namespace stefan {

// Deterministic helpers on top of mt19937_64. The standard distributions are
// implementation-defined, so draws go through these to keep output stable
// across toolchains.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

inline int uniform_int(std::mt19937_64& gen, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(gen() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Halton low-discrepancy point in [0,1)^dim, bases 2,3,5,7,...
inline void halton_point(std::uint64_t index, int dim, double* out) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  for (int d = 0; d < dim; ++d) {
    const int b = primes[d];
    double f = 1.0, r = 0.0;
    std::uint64_t i = index + 1;
    while (i > 0) {
      f /= b;
      r += f * static_cast<double>(i % static_cast<std::uint64_t>(b));
      i /= static_cast<std::uint64_t>(b);
    }
    out[d] = r;
  }
}

}  // namespace stefan
