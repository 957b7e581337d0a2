#include "mvd/datasets/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/SVD>

#include "mvd/ndgrad/nn.hpp"

namespace mvd::datasets {

namespace {

using ndgrad::Rng;
using Index = Eigen::Index;

constexpr int kSpecificComponents = 3;
constexpr int kMaxMeanAttempts = 10000;

// Random matrix with singular values spread evenly over [0.5, 1] * gain.
Matrix banded_random_map(Index rows, Index cols, double gain, Rng& rng) {
  Matrix g = ndgrad::random_normal(rows, cols, rng);
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = std::min(rows, cols);
  Eigen::VectorXd sv(k);
  for (Index i = 0; i < k; ++i) sv(i) = gain * (k == 1 ? 1.0 : 1.0 - 0.5 * static_cast<double>(i) / (k - 1));
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

Matrix draw_class_means(const SyntheticSpec& spec, Rng& rng) {
  const double min_sep = std::max(6.0 * spec.noise_std, spec.class_scale);
  for (int attempt = 0; attempt < kMaxMeanAttempts; ++attempt) {
    Matrix means = ndgrad::random_normal(spec.num_classes, spec.consistent_dim, rng, spec.class_scale);
    bool ok = true;
    for (Index a = 0; a < means.rows() && ok; ++a) {
      for (Index b = a + 1; b < means.rows() && ok; ++b) ok = (means.row(a) - means.row(b)).norm() >= min_sep;
    }
    if (ok) return means;
  }
  throw std::runtime_error("gen_synthetic: could not place separated class means; raise consistent_dim");
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SyntheticSpec: at least two classes required");
  if (num_instances < num_classes) throw std::invalid_argument("SyntheticSpec: fewer instances than classes");
  if (num_views < 2) throw std::invalid_argument("SyntheticSpec: at least two views required");
  if (consistent_dim < 1 || specific_dim < 1 || view_dim < 1) {
    throw std::invalid_argument("SyntheticSpec: dimensions must be positive");
  }
  if (!(noise_std >= 0.0) || !(class_scale > 0.0) || !(specific_scale >= 0.0) || !(specific_component_std >= 0.0)) {
    throw std::invalid_argument("SyntheticSpec: scales must be non-negative (class_scale positive)");
  }
}

Matrix synthetic_class_means(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return draw_class_means(spec, rng);
}

MultiViewBatch gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Index n = spec.num_instances;
  const Index ds = spec.consistent_dim;
  const Index dp = spec.specific_dim;
  const Index dv = spec.view_dim;
  const Index hidden = ds + dp + 8;

  Matrix class_means = draw_class_means(spec, rng);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) labels[static_cast<std::size_t>(k)] = static_cast<int>(k % spec.num_classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  Matrix consistent = ndgrad::random_normal(n, ds, rng, spec.noise_std);
  for (Index k = 0; k < n; ++k) consistent.row(k) += class_means.row(labels[static_cast<std::size_t>(k)]);

  MultiViewBatch batch;
  batch.labels = labels;
  batch.ids.resize(static_cast<std::size_t>(n));
  std::iota(batch.ids.begin(), batch.ids.end(), 0);
  std::vector<Matrix> specific;

  std::uniform_int_distribution<int> component(0, kSpecificComponents - 1);
  for (int v = 0; v < spec.num_views; ++v) {
    Matrix comp_means = ndgrad::random_normal(kSpecificComponents, dp, rng, spec.specific_scale);
    Matrix p = ndgrad::random_normal(n, dp, rng, spec.specific_component_std);
    for (Index k = 0; k < n; ++k) p.row(k) += comp_means.row(component(rng));

    Matrix a1 = banded_random_map(hidden, ds + dp, 0.6, rng);
    Matrix b1 = ndgrad::random_normal(1, hidden, rng, 0.1);
    Matrix a2 = banded_random_map(dv, hidden, 1.5, rng);

    Matrix z(n, ds + dp);
    z << consistent, p;
    Matrix h = ((z * a1.transpose()).rowwise() + b1.row(0)).array().tanh().matrix();
    Matrix x = h * a2.transpose() + ndgrad::random_normal(n, dv, rng, spec.noise_std);
    if (spec.standardize) {
      x.rowwise() -= x.colwise().mean();
      const Eigen::RowVectorXd sd = (x.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
      for (Index c = 0; c < dv; ++c) {
        if (sd(c) > 0.0) x.col(c) /= sd(c);
      }
    }
    batch.views.push_back(std::move(x));
    specific.push_back(std::move(p));
  }
  batch.gt_specific = std::move(specific);
  batch.gt_consistent = std::move(consistent);
  batch.validate();
  return batch;
}

}  // namespace mvd::datasets
