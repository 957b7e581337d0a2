#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::consistency {

using ndgrad::Matrix;
using ndgrad::Tensor;

/// Multi-view InfoNCE over the pooled M = 2BV contrastive vectors.
///
/// `z_blocks` holds aligned B x d blocks (row k of every block is instance k),
/// already L2-normalized, grouped view by view with `blocks_per_view`
/// consecutive blocks each. The positives of an anchor are the same instance in
/// the other views; the denominator runs over all M - 1 non-anchor vectors,
/// same-view copies included. The result is the mean over all (anchor, positive)
/// terms, so uniform similarities give exactly log(M - 1).
Tensor contrastive_loss(std::span<const Tensor> z_blocks, double tau, std::size_t blocks_per_view = 1);

/// -mean_k log max(<a_k, b_k>, 1e-12) for two aligned assignment blocks.
Tensor agreement_loss(const Tensor& a, const Tensor& b);

/// sum_c g'_c log g'_c of the batch-mean assignment g' (the negative entropy).
Tensor negative_entropy(const Tensor& assign);

struct ClusteringLossParts {
  Tensor total;
  Tensor agreement;
  /// Mean over views of the batch-mean assignment's negative entropy.
  Tensor negative_entropy;
};

/// Agreement over every unordered view pair (and any extra aligned pairs, e.g.
/// mined neighbours), all pairs weighted equally, plus lambda_clu times the
/// view-averaged negative entropy.
ClusteringLossParts clustering_loss(std::span<const Tensor> view_assign, double lambda_clu,
                                    std::span<const std::pair<Tensor, Tensor>> extra_pairs = {});

}  // namespace mvd::consistency
