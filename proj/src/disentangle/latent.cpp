#include "mvd/disentangle/latent.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvd/ndgrad/ops.hpp"

namespace mvd::disentangle {

namespace nd = ndgrad;

namespace {

std::vector<std::size_t> widths_of(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

ViewEncoder::ViewEncoder(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t latent_dim,
                         nd::Rng& rng)
    : net_(widths_of(input_dim, hidden, 2 * latent_dim), nd::Activation::kRelu, rng), latent_dim_(latent_dim) {
  if (latent_dim == 0) throw std::invalid_argument("ViewEncoder: latent_dim must be positive");
}

GaussianLatent ViewEncoder::operator()(const Tensor& x) const {
  Tensor out = net_(x);
  return {nd::slice_last(out, 0, latent_dim_),
          nd::clamp(nd::slice_last(out, latent_dim_, 2 * latent_dim_), kLogStdMin, kLogStdMax)};
}

ViewDecoder::ViewDecoder(std::size_t latent_dim, std::size_t cond_dim, const std::vector<std::size_t>& hidden,
                         std::size_t output_dim, nd::Rng& rng)
    : net_(widths_of(latent_dim + cond_dim, hidden, output_dim), nd::Activation::kRelu, rng),
      latent_dim_(latent_dim),
      cond_dim_(cond_dim) {}

Tensor ViewDecoder::operator()(const Tensor& z, const Tensor& cond) const {
  if (z.cols() != latent_dim_ || cond.cols() != cond_dim_) {
    throw nd::ShapeError("ViewDecoder: input width must equal latent_dim + cond_dim");
  }
  return net_(cond_dim_ == 0 ? z : nd::concat_last({z, cond}));
}

Tensor reparameterize(const GaussianLatent& latent, const Matrix& eps) {
  return latent.mean + nd::exp(latent.log_std) * Tensor::from_matrix(eps);
}

Tensor reparameterize(const GaussianLatent& latent, nd::Rng& rng) {
  const auto& m = latent.mean.value();
  return reparameterize(latent, nd::random_normal(m.rows(), m.cols(), rng));
}

Tensor kl_std_normal(const GaussianLatent& latent) {
  Tensor per_dim = nd::square(latent.mean) + nd::exp(latent.log_std * 2.0) - 1.0 - latent.log_std * 2.0;
  return nd::mean(nd::sum_last(per_dim)) * 0.5;
}

Tensor reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
  if (x.shape() != x_hat.shape()) throw nd::ShapeError("reconstruction_loss: shapes differ");
  return nd::mean(nd::sum_last(nd::square(x - x_hat)));
}

Tensor diagonal_gaussian_log_prob(const Tensor& h, const Tensor& mean, const Tensor& log_std) {
  const double d = static_cast<double>(h.cols());
  Tensor z = (h - mean) * nd::exp(-log_std);
  Tensor per_dim = nd::square(z) * 0.5 + log_std;
  return -nd::sum_last(per_dim) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

}  // namespace mvd::disentangle
