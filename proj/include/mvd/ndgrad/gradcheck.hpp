#pragma once

#include <functional>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::ndgrad {

struct GradCheckReport {
  /// Per parameter: max|g_ad - g_fd| / (max|g_ad| + max|g_fd| + 1e-12).
  std::vector<double> relative_errors;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `fn` against central finite differences.
/// `fn` must rebuild its graph from `params` on every call and be deterministic.
/// Throws DomainError if fn evaluates to a non-finite value.
GradCheckReport gradient_check(const std::function<Tensor()>& fn, const std::vector<Tensor>& params,
                               double h = 1e-5, double tol = 1e-5);

}  // namespace mvd::ndgrad
