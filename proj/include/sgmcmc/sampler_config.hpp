#pragma once

#include "sgmcmc/numerics.hpp"

#include <cstddef>
#include <cstdint>

namespace sgmcmc {

struct SamplerConfig {
  double h = 1e-3;             // stepsize
  double beta = 1.0;           // inverse temperature
  double friction = 1.0;       // effective friction A
  double thermal_mass = 1.0;   // mu
  Vector mass_diag;            // diagonal of M
  std::size_t batch = 500;     // minibatch size n
  std::uint64_t seed = 0;
  double passes = 1.0;         // passes over the dataset
  double burn_in_fraction = 0.0;

  // M = I, beta = 1, mu = N_d.
  static SamplerConfig defaults(std::size_t dim);

  // Throws InvalidInput on out-of-range values.
  void validate(std::size_t dim) const;
};

}  // namespace sgmcmc
