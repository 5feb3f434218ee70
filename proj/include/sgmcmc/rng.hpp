#pragma once

#include "sgmcmc/numerics.hpp"

#include <cstdint>
#include <random>

namespace sgmcmc {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream index); chains seeded this way do not
// depend on scheduling order.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

inline Vector standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

}  // namespace sgmcmc
