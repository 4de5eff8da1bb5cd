#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace opdyn::rng {

/// Uniform and Gaussian draws on top of mt19937_64 raw output. The mappings
/// are pinned here so seeded streams do not depend on the standard library's
/// distribution implementations.
inline double u01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * u01(gen);
}

/// Box-Muller transform.
inline double gaussian(std::mt19937_64& gen) {
  double u1 = u01(gen);
  while (u1 <= 0.0) u1 = u01(gen);
  const double u2 = u01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace opdyn::rng
