#include "mvd/consistency/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "mvd/ndgrad/ops.hpp"

namespace mvd::consistency {

namespace nd = ndgrad;

namespace {

constexpr double kMaskedLogit = -1e9;
constexpr double kDotFloor = 1e-12;

}  // namespace

Tensor contrastive_loss(std::span<const Tensor> z_blocks, double tau, std::size_t blocks_per_view) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be positive");
  const std::size_t blocks = z_blocks.size();
  if (blocks_per_view == 0 || blocks % blocks_per_view != 0 || blocks / blocks_per_view < 2) {
    throw std::invalid_argument("contrastive_loss: need at least two views of equal block count");
  }
  const std::size_t b = z_blocks.front().rows();
  for (const auto& z : z_blocks) {
    if (z.rank() != 2 || z.rows() != b || z.cols() != z_blocks.front().cols()) {
      throw nd::ShapeError("contrastive_loss: blocks must share shape B x d");
    }
  }
  if (b < 2) throw std::invalid_argument("contrastive_loss: batch has no negative pairs (B < 2)");

  const auto m = static_cast<Eigen::Index>(blocks * b);
  Tensor z = nd::concat_rows(z_blocks);
  Tensor sim = nd::matmul(z, nd::transpose(z)) * (1.0 / tau);

  Matrix diag_mask = Matrix::Zero(m, m);
  diag_mask.diagonal().setConstant(kMaskedLogit);
  Tensor lse = nd::logsumexp_last(sim + Tensor::from_matrix(diag_mask));

  Matrix positives = Matrix::Zero(m, m);
  const auto rows = static_cast<Eigen::Index>(b);
  const auto group = static_cast<Eigen::Index>(blocks_per_view) * rows;
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index p = a % rows; p < m; p += rows) {
      if (p / group != a / group) positives(a, p) = 1.0;
    }
  }
  const double per_anchor = static_cast<double>(blocks - blocks_per_view);
  Tensor pos_sum = nd::sum(sim * Tensor::from_matrix(positives));
  return (nd::sum(lse) * per_anchor - pos_sum) * (1.0 / (static_cast<double>(m) * per_anchor));
}

Tensor agreement_loss(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw nd::ShapeError("agreement_loss: assignment shapes differ");
  return -nd::mean(nd::log(nd::clamp_min(nd::sum_last(a * b), kDotFloor)));
}

Tensor negative_entropy(const Tensor& assign) {
  Tensor g = nd::mean_rows(assign);
  return nd::sum(g * nd::log(nd::clamp_min(g, 1e-300)));
}

ClusteringLossParts clustering_loss(std::span<const Tensor> view_assign, double lambda_clu,
                                    std::span<const std::pair<Tensor, Tensor>> extra_pairs) {
  if (view_assign.size() < 2) throw std::invalid_argument("clustering_loss: need at least two views");
  if (lambda_clu < 0.0) throw std::invalid_argument("clustering_loss: lambda_clu must be non-negative");
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < view_assign.size(); ++i) {
    for (std::size_t j = i + 1; j < view_assign.size(); ++j) {
      terms.push_back(agreement_loss(view_assign[i], view_assign[j]));
    }
  }
  for (const auto& [a, b] : extra_pairs) terms.push_back(agreement_loss(a, b));
  Tensor agreement = terms.front();
  for (std::size_t t = 1; t < terms.size(); ++t) agreement = agreement + terms[t];
  agreement = agreement * (1.0 / static_cast<double>(terms.size()));

  Tensor neg_ent = negative_entropy(view_assign.front());
  for (std::size_t v = 1; v < view_assign.size(); ++v) neg_ent = neg_ent + negative_entropy(view_assign[v]);
  neg_ent = neg_ent * (1.0 / static_cast<double>(view_assign.size()));

  return {agreement + neg_ent * lambda_clu, agreement, neg_ent};
}

}  // namespace mvd::consistency
