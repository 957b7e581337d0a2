#pragma once

#include <cstdint>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::ndgrad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of leaf parameters.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  /// Applies one update using the gradients of a backward pass.
  void step(const Gradients& grads);
  /// Same, with gradients aligned to params() by position.
  void step(const std::vector<Matrix>& grads);

  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_step_count(std::uint64_t step) { step_ = step; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t step_ = 0;
};

}  // namespace mvd::ndgrad
