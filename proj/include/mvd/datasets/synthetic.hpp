#pragma once

#include <cstdint>

#include "mvd/datasets/multiview.hpp"

namespace mvd::datasets {

/// Generative recipe for a multi-view dataset whose shared (class) factor and
/// per-view private factors are known.
///
/// Each instance draws a class c and a consistent factor s = mean_c + jitter.
/// Each view draws its own private factor p_v from a 3-component Gaussian
/// mixture that ignores the class, and observes
///   x_v = A2_v tanh(A1_v [s; p_v] + b_v) + noise
/// through frozen random weights whose singular values are pinned to a fixed
/// band, so both factors stay recoverable from x_v.
struct SyntheticSpec {
  int num_classes = 4;
  int num_views = 2;
  int consistent_dim = 4;
  int specific_dim = 4;
  int view_dim = 24;
  int num_instances = 2000;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
  /// Spread of the class means in factor space.
  double class_scale = 1.0;
  /// Spread of the private mixture component means.
  double specific_scale = 1.5;
  /// Within-component standard deviation of the private factors.
  double specific_component_std = 0.35;
  /// Rescale every observed feature to zero mean and unit variance after noise is added.
  bool standardize = true;

  /// Throws std::invalid_argument for degenerate specs (C < 2, N < C, V < 2, ...).
  void validate() const;
};

/// Generates the full dataset with labels, tracer ids, and ground-truth
/// private factors. Classes are exactly balanced up to N mod C.
MultiViewBatch gen_synthetic(const SyntheticSpec& spec);

/// Class means used by gen_synthetic for `spec` (C x consistent_dim).
Matrix synthetic_class_means(const SyntheticSpec& spec);

}  // namespace mvd::datasets
