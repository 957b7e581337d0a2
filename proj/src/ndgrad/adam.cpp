#include "mvd/ndgrad/adam.hpp"

#include <cmath>

namespace mvd::ndgrad {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0) || !(options_.beta1 > 0.0) || !(options_.beta2 > 0.0) || !(options_.eps > 0.0)) {
    throw std::invalid_argument("Adam: lr, beta1, beta2 and eps must be positive");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.requires_grad() || !p.is_leaf()) throw std::invalid_argument("Adam: parameters must be trainable leaves");
    m_.push_back(Matrix::Zero(p.value().rows(), p.value().cols()));
    v_.push_back(Matrix::Zero(p.value().rows(), p.value().cols()));
  }
}

void Adam::step(const Gradients& grads) {
  std::vector<Matrix> aligned;
  aligned.reserve(params_.size());
  for (const auto& p : params_) aligned.push_back(grads.at(p));
  step(aligned);
}

void Adam::step(const std::vector<Matrix>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("Adam: gradient count does not match parameter count");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grads[i].rows() != m_[i].rows() || grads[i].cols() != m_[i].cols()) {
      throw ShapeError("Adam: gradient shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * grads[i];
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * grads[i].cwiseAbs2();
    auto m_hat = m_[i].array() / bc1;
    auto v_hat = v_[i].array() / bc2;
    params_[i].mutable_value().array() -= options_.lr * m_hat / (v_hat.sqrt() + options_.eps);
  }
}

}  // namespace mvd::ndgrad
