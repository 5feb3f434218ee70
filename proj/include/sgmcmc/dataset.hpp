#pragma once

#include "sgmcmc/numerics.hpp"

#include <cstddef>

namespace sgmcmc {

// Column i of `features` is x_i.
struct Dataset {
  Matrix features;  // d x N
  Vector labels;    // N

  std::size_t size() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.rows()); }
  bool empty() const { return features.cols() == 0; }

  // Shapes agree and entries are finite; with `binary_labels`, every label
  // is -1 or +1.
  void validate(bool binary_labels) const;
};

}  // namespace sgmcmc
