#include "mvd/datasets/augment.hpp"

#include <algorithm>
#include <stdexcept>

namespace mvd::datasets {

void AugmentationPolicy::validate() const {
  if (!(gaussian_noise_std >= 0.0)) throw std::invalid_argument("AugmentationPolicy: noise std must be >= 0");
  if (!(feature_dropout_prob >= 0.0 && feature_dropout_prob < 1.0)) {
    throw std::invalid_argument("AugmentationPolicy: dropout probability must lie in [0,1)");
  }
  if (!(scale_jitter_lo > 0.0 && scale_jitter_lo <= 1.0 && scale_jitter_hi >= 1.0)) {
    throw std::invalid_argument("AugmentationPolicy: scale jitter range must satisfy 0 < lo <= 1 <= hi");
  }
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) {
    throw std::invalid_argument("AugmentationPolicy: occlusion probability must lie in [0,1]");
  }
  if (!(occlusion_max_fraction > 0.0 && occlusion_max_fraction <= 1.0)) {
    throw std::invalid_argument("AugmentationPolicy: occlusion fraction must lie in (0,1]");
  }
}

bool AugmentationPolicy::is_identity() const {
  return gaussian_noise_std == 0.0 && feature_dropout_prob == 0.0 && scale_jitter_lo == 1.0 &&
         scale_jitter_hi == 1.0 && (occlusion_prob == 0.0 || image_height == 0);
}

Matrix augment_block(const Matrix& x, const AugmentationPolicy& policy, std::mt19937_64& rng) {
  Matrix out = x;
  if (policy.is_identity()) return out;
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  if (policy.scale_jitter_lo != 1.0 || policy.scale_jitter_hi != 1.0) {
    std::uniform_real_distribution<double> scale(policy.scale_jitter_lo, policy.scale_jitter_hi);
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) *= scale(rng);
  }
  if (policy.feature_dropout_prob > 0.0) {
    std::bernoulli_distribution drop(policy.feature_dropout_prob);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (drop(rng)) out.data()[i] = 0.0;
    }
  }
  const bool image = policy.image_height > 0 && policy.image_width > 0 &&
                     static_cast<Eigen::Index>(policy.image_height * policy.image_width) == d;
  if (image && policy.occlusion_prob > 0.0) {
    std::bernoulli_distribution occlude(policy.occlusion_prob);
    const auto h = static_cast<long>(policy.image_height);
    const auto w = static_cast<long>(policy.image_width);
    const long max_h = std::max(1L, static_cast<long>(policy.occlusion_max_fraction * h));
    const long max_w = std::max(1L, static_cast<long>(policy.occlusion_max_fraction * w));
    std::uniform_int_distribution<long> rh(1, max_h);
    std::uniform_int_distribution<long> rw(1, max_w);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!occlude(rng)) continue;
      const long oh = rh(rng);
      const long ow = rw(rng);
      const long top = std::uniform_int_distribution<long>(0, h - oh)(rng);
      const long left = std::uniform_int_distribution<long>(0, w - ow)(rng);
      for (long r = top; r < top + oh; ++r) out.row(i).segment(r * w + left, ow).setZero();
    }
  }
  if (policy.gaussian_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, policy.gaussian_noise_std);
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += noise(rng);
  }
  return out;
}

AugmentedViews augment(const MultiViewBatch& batch, const AugmentationPolicy& policy, std::mt19937_64& rng) {
  policy.validate();
  AugmentedViews out;
  out.blocks.reserve(2 * batch.num_views());
  for (const auto& view : batch.views) {
    out.blocks.push_back(augment_block(view, policy, rng));
    out.blocks.push_back(augment_block(view, policy, rng));
  }
  out.ids = batch.ids;
  out.labels = batch.labels;
  return out;
}

}  // namespace mvd::datasets
