#pragma once

#include <cstdint>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::evaluate {

using ndgrad::Matrix;

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  /// Relative inertia change below which Lloyd iterations stop.
  double tolerance = 1e-6;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// inertia. An emptied cluster is re-seeded with the point farthest from its
/// centroid. Deterministic given `seed`.
KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace mvd::evaluate
