#pragma once

#include <array>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::evaluate {

struct Projection2D {
  ndgrad::Matrix coords;  // N x 2
  std::array<double, 2> explained_ratio{0.0, 0.0};
  /// Loadings of the two components, d x 2.
  ndgrad::Matrix components;
};

/// Top-2 principal components of the centered covariance. Each component's
/// largest-magnitude loading is made positive. Zero-variance input yields zero
/// coordinates and a warning on stderr.
Projection2D pca_project(const ndgrad::Matrix& x);

}  // namespace mvd::evaluate
