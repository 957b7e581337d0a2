#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::ndgrad {

using Rng = std::mt19937_64;

/// Name-tagged parameter list, used for optimizers and checkpoints.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0);
Matrix random_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi);

std::vector<Tensor> tensors_of(const NamedTensors& named);

enum class Activation { kRelu, kTanh };

/// Fully connected layer y = x W + b with W stored as [in, out].
class Linear {
 public:
  Linear() = default;
  /// He-uniform weights, zero bias.
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return weight_.rows(); }
  std::size_t out_features() const { return weight_.cols(); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  void collect(NamedTensors& out, const std::string& prefix) const;

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Stack of Linear layers with an activation between them (not after the last).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& widths, Activation activation, Rng& rng);

  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  void collect(NamedTensors& out, const std::string& prefix) const;

 private:
  std::vector<Linear> layers_;
  Activation activation_ = Activation::kRelu;
};

}  // namespace mvd::ndgrad
