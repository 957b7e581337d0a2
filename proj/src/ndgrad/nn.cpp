#include "mvd/ndgrad/nn.hpp"

#include <cmath>

#include "mvd/ndgrad/ops.hpp"

namespace mvd::ndgrad {

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev) {
  if (stddev == 0.0) return Matrix::Zero(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix random_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::vector<Tensor> tensors_of(const NamedTensors& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ShapeError("Linear: extents must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  const auto r = static_cast<Eigen::Index>(in);
  const auto c = static_cast<Eigen::Index>(out);
  weight_ = Tensor::parameter(random_uniform(r, c, rng, -bound, bound));
  bias_ = Tensor::parameter(Matrix::Zero(1, c));
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight_), bias_); }

void Linear::collect(NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight_);
  out.emplace_back(prefix + ".bias", bias_);
}

Mlp::Mlp(const std::vector<std::size_t>& widths, Activation activation, Rng& rng) : activation_(activation) {
  if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1], rng);
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = activation_ == Activation::kRelu ? relu(h) : tanh(h);
  }
  return h;
}

void Mlp::collect(NamedTensors& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + "." + std::to_string(i));
}

}  // namespace mvd::ndgrad
