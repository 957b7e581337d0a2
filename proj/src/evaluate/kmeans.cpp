#include "mvd/evaluate/kmeans.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mvd::evaluate {

namespace {

using Index = Eigen::Index;

Matrix plus_plus_seed(const Matrix& x, int k, std::mt19937_64& rng) {
  const Index n = x.rows();
  Matrix centroids(k, x.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centroids.row(0) = x.row(first(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      pick = -1;
      for (Index i = 0; i < n; ++i) {
        if (d2(i) <= 0.0) continue;
        pick = i;
        acc += d2(i);
        if (acc > target) break;
      }
    } else {
      pick = first(rng);
    }
    centroids.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

// Returns inertia; fills labels and per-point squared distance.
double assign(const Matrix& x, const Matrix& centroids, std::vector<int>& labels, Eigen::VectorXd& dist) {
  const Index n = x.rows();
  // |x - c|^2 = |x|^2 - 2 x.c + |c|^2
  Matrix cross = x * centroids.transpose();
  Eigen::VectorXd xn = x.rowwise().squaredNorm();
  Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
  double inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = std::max(0.0, xn(i) - 2.0 * cross(i, c) + cn(c));
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
    dist(i) = best;
    inertia += best;
  }
  return inertia;
}

KMeansResult lloyd(const Matrix& x, int k, std::mt19937_64& rng, const KMeansOptions& options) {
  const Index n = x.rows();
  KMeansResult result;
  result.centroids = plus_plus_seed(x, k, rng);
  result.labels.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist(n);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.inertia = assign(x, result.centroids, result.labels, dist);
    if (std::isfinite(previous) && previous - result.inertia <= options.tolerance * previous) break;
    previous = result.inertia;

    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(result.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(result.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        Index far = 0;
        dist.maxCoeff(&far);
        result.centroids.row(c) = x.row(far);
        dist(far) = 0.0;
      }
    }
  }
  result.inertia = assign(x, result.centroids, result.labels, dist);
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, const KMeansOptions& options) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (x.rows() < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (options.restarts < 1 || options.max_iterations < 1) throw std::invalid_argument("kmeans: bad options");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    auto candidate = lloyd(x, k, rng, options);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

}  // namespace mvd::evaluate
