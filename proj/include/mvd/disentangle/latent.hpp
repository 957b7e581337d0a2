#pragma once

#include <cstddef>
#include <vector>

#include "mvd/ndgrad/nn.hpp"

namespace mvd::disentangle {

using ndgrad::Matrix;
using ndgrad::Tensor;

inline constexpr double kLogStdMin = -6.0;
inline constexpr double kLogStdMax = 3.0;
inline constexpr double kLogDensityFloor = -745.0;

/// Diagonal Gaussian per instance.
struct GaussianLatent {
  Tensor mean;
  Tensor log_std;
};

/// x_v -> (mu, log sigma), log sigma clamped to [-6, 3].
class ViewEncoder {
 public:
  ViewEncoder() = default;
  ViewEncoder(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t latent_dim, ndgrad::Rng& rng);

  GaussianLatent operator()(const Tensor& x) const;
  std::size_t latent_dim() const { return latent_dim_; }
  ndgrad::Mlp& net() { return net_; }
  void collect(ndgrad::NamedTensors& out, const std::string& prefix) const { net_.collect(out, prefix); }

 private:
  ndgrad::Mlp net_;
  std::size_t latent_dim_ = 0;
};

/// [z ; cond] -> reconstruction of x_v.
class ViewDecoder {
 public:
  ViewDecoder() = default;
  ViewDecoder(std::size_t latent_dim, std::size_t cond_dim, const std::vector<std::size_t>& hidden,
              std::size_t output_dim, ndgrad::Rng& rng);

  Tensor operator()(const Tensor& z, const Tensor& cond) const;
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t cond_dim() const { return cond_dim_; }
  void collect(ndgrad::NamedTensors& out, const std::string& prefix) const { net_.collect(out, prefix); }

 private:
  ndgrad::Mlp net_;
  std::size_t latent_dim_ = 0;
  std::size_t cond_dim_ = 0;
};

/// mean + exp(log_std) * eps for a fixed standard-normal draw `eps`.
Tensor reparameterize(const GaussianLatent& latent, const Matrix& eps);
/// Draws eps from `rng` first.
Tensor reparameterize(const GaussianLatent& latent, ndgrad::Rng& rng);

/// Batch mean of 1/2 sum_d (mu^2 + sigma^2 - 1 - 2 log sigma).
Tensor kl_std_normal(const GaussianLatent& latent);

/// Batch mean of the per-instance squared error summed over features.
Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat);

/// Row-wise log N(h; mean, diag(exp(log_std))^2) -> [B, 1].
Tensor diagonal_gaussian_log_prob(const Tensor& h, const Tensor& mean, const Tensor& log_std);

}  // namespace mvd::disentangle
