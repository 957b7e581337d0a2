#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mvd/datasets/multiview.hpp"

namespace mvd::datasets {

/// Stochastic vector-space transformation. For image views the policy can also
/// zero a random rectangle (occlusion) in place of crops.
struct AugmentationPolicy {
  double gaussian_noise_std = 0.0;
  /// Probability of zeroing each feature; must be < 1.
  double feature_dropout_prob = 0.0;
  double scale_jitter_lo = 1.0;
  double scale_jitter_hi = 1.0;

  // Occlusion applies only when image extents are set and match the view width.
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  double occlusion_prob = 0.0;
  double occlusion_max_fraction = 0.5;

  void validate() const;
  bool is_identity() const;
};

/// 2V aligned blocks: block(v, a) is augmentation a in {0,1} of view v.
struct AugmentedViews {
  std::vector<Matrix> blocks;
  std::vector<std::int64_t> ids;
  std::optional<std::vector<int>> labels;

  std::size_t num_views() const { return blocks.size() / 2; }
  const Matrix& block(std::size_t view, std::size_t copy) const { return blocks.at(2 * view + copy); }
};

/// Produces two independently augmented copies of every view. Rows stay aligned
/// with the input and labels are passed through unchanged.
AugmentedViews augment(const MultiViewBatch& batch, const AugmentationPolicy& policy, std::mt19937_64& rng);

/// Applies the policy once to a single block.
Matrix augment_block(const Matrix& x, const AugmentationPolicy& policy, std::mt19937_64& rng);

}  // namespace mvd::datasets
