#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::evaluate {

using ndgrad::Matrix;

class StratificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class seeded split; every class keeps at least one training instance.
/// Throws StratificationError when fewer than two classes are present.
Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

struct ProbeOptions {
  double l2 = 1e-4;
  int max_iterations = 3000;
  double gradient_tolerance = 1e-7;
};

struct ProbeResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Multinomial logistic regression on standardized features, trained by
/// accelerated full-batch gradient descent. Throws StratificationError if a
/// test class is missing from the training labels or training has one class.
ProbeResult linear_probe(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                         std::span<const int> test_y, const ProbeOptions& options = {});

/// Convenience: stratified 80/20 (or `train_fraction`) split then linear_probe.
ProbeResult linear_probe_split(const Matrix& x, std::span<const int> labels, std::uint64_t seed,
                               double train_fraction = 0.8, const ProbeOptions& options = {});

/// Macro-averaged F1 over the union of classes in truth and prediction.
double macro_f1(std::span<const int> pred, std::span<const int> truth);

/// Ordinary least squares with intercept; returns the R^2 of predicting each
/// target column, averaged over columns (evaluated in-sample).
double linear_regression_r2(const Matrix& x, const Matrix& y);

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows);

}  // namespace mvd::evaluate
