#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "mvd/disentangle/latent.hpp"
#include "mvd/ndgrad/adam.hpp"

namespace mvd::disentangle {

/// Diagonal-Gaussian mixture r(h). Weights are stored as logits so they stay
/// on the simplex; log-stds are clamped to [-6, 3] when evaluated.
class MixtureOfGaussians {
 public:
  MixtureOfGaussians() = default;
  /// Zero logits, unit stds, means drawn from N(0, 1).
  MixtureOfGaussians(std::size_t components, std::size_t dim, ndgrad::Rng& rng);

  /// Row-wise log r(h) -> [B, 1], floored at -745 (the first time, a warning goes to stderr).
  Tensor log_prob(const Tensor& h) const;
  Matrix weights() const;
  /// Draws n samples.
  Matrix sample(std::size_t n, ndgrad::Rng& rng) const;

  std::size_t components() const { return means_.rows(); }
  std::size_t dim() const { return means_.cols(); }
  Tensor& logits() { return logits_; }
  Tensor& means() { return means_; }
  Tensor& log_stds() { return log_stds_; }
  const Tensor& means() const { return means_; }
  const Tensor& log_stds() const { return log_stds_; }
  void collect(ndgrad::NamedTensors& out, const std::string& prefix) const;

 private:
  Tensor logits_;
  Tensor means_;
  Tensor log_stds_;
};

/// q(h | s): MLP s -> (mean, log_std), log_std clamped to [-6, 3].
class VariationalConditional {
 public:
  VariationalConditional() = default;
  VariationalConditional(std::size_t cond_dim, std::size_t hidden, std::size_t latent_dim, ndgrad::Rng& rng);

  GaussianLatent operator()(const Tensor& s) const;
  /// Row-wise log q(h | s) -> [B, 1].
  Tensor log_prob(const Tensor& s, const Tensor& h) const;
  void collect(ndgrad::NamedTensors& out, const std::string& prefix) const { net_.collect(out, prefix); }
  ndgrad::Mlp& net() { return net_; }

 private:
  ndgrad::Mlp net_;
  std::size_t latent_dim_ = 0;
};

/// Monte-Carlo estimate mean_k [log q(h_k | s_k) - log r(h_k)].
Tensor mi_upper_bound(const Tensor& s, const Tensor& h, const VariationalConditional& q_cond,
                      const MixtureOfGaussians& r);

/// q_cond and r with their own Adam states.
class VariationalFitter {
 public:
  VariationalFitter(VariationalConditional q_cond, MixtureOfGaussians r, double lr);

  /// `steps` Adam updates maximizing mean log q(h|s) and mean log r(h) on fixed samples.
  /// Returns the final (negated) fitting losses {q, r}.
  std::pair<double, double> fit(const Matrix& s, const Matrix& h, int steps);

  const VariationalConditional& q_cond() const { return q_cond_; }
  const MixtureOfGaussians& r() const { return r_; }
  VariationalConditional& q_cond() { return q_cond_; }
  MixtureOfGaussians& r() { return r_; }
  ndgrad::Adam& q_optimizer() { return *q_adam_; }
  ndgrad::Adam& r_optimizer() { return *r_adam_; }
  const ndgrad::Adam& q_optimizer() const { return *q_adam_; }
  const ndgrad::Adam& r_optimizer() const { return *r_adam_; }

 private:
  VariationalConditional q_cond_;
  MixtureOfGaussians r_;
  std::unique_ptr<ndgrad::Adam> q_adam_;
  std::unique_ptr<ndgrad::Adam> r_adam_;
};

/// Free-function form: a single call of VariationalFitter::fit. steps must be >= 1.
std::pair<double, double> fit_variational(VariationalFitter& fitter, const Matrix& s, const Matrix& h, int steps);

}  // namespace mvd::disentangle
