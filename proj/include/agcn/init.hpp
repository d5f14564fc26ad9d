#pragma once

#include <cmath>

#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"

namespace agcn {

// Uniform(-b, b) with b = sqrt(6 / (rows + cols)). Entries are drawn in
// row-major order so the layout is reproducible for a given seed.
inline Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.raw()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace agcn
