#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::datasets {

using ndgrad::Matrix;

/// Aligned per-view feature blocks: row k of every view is the same object.
struct MultiViewBatch {
  std::vector<Matrix> views;
  std::optional<std::vector<int>> labels;
  /// Ground-truth view-specific factors, one B x d_p block per view (synthetic data only).
  std::optional<std::vector<Matrix>> gt_specific;
  /// Ground-truth shared factor, B x d_s (synthetic only).
  std::optional<Matrix> gt_consistent;
  /// Tracer ids of the underlying instances.
  std::vector<std::int64_t> ids;

  std::size_t size() const { return views.empty() ? 0 : static_cast<std::size_t>(views.front().rows()); }
  std::size_t num_views() const { return views.size(); }
  std::size_t view_dim(std::size_t v) const { return static_cast<std::size_t>(views.at(v).cols()); }

  /// Throws std::invalid_argument unless V >= 2 and all blocks share the row count.
  void validate() const;

  MultiViewBatch select(std::span<const std::size_t> rows) const;
};

/// Rows `rows` of `m`, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

/// Index batches of a seeded permutation of [0, n); a trailing batch smaller than 2 is dropped.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch, std::mt19937_64& rng);

}  // namespace mvd::datasets
