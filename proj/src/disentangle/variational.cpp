#include "mvd/disentangle/variational.hpp"

#include <cmath>
#include <atomic>
#include <iostream>
#include <random>
#include <stdexcept>

#include "mvd/ndgrad/ops.hpp"

namespace mvd::disentangle {

namespace nd = ndgrad;

MixtureOfGaussians::MixtureOfGaussians(std::size_t components, std::size_t dim, nd::Rng& rng) {
  if (components == 0 || dim == 0) throw std::invalid_argument("MixtureOfGaussians: empty mixture");
  const auto k = static_cast<Eigen::Index>(components);
  const auto d = static_cast<Eigen::Index>(dim);
  logits_ = Tensor::parameter(Matrix::Zero(1, k));
  means_ = Tensor::parameter(nd::random_normal(k, d, rng));
  log_stds_ = Tensor::parameter(Matrix::Zero(k, d));
}

Tensor MixtureOfGaussians::log_prob(const Tensor& h) const {
  if (h.cols() != dim()) throw nd::ShapeError("MixtureOfGaussians: sample width mismatch");
  Tensor log_std = nd::clamp(log_stds_, kLogStdMin, kLogStdMax);
  std::vector<Tensor> per_component;
  per_component.reserve(components());
  for (std::size_t c = 0; c < components(); ++c) {
    per_component.push_back(
        diagonal_gaussian_log_prob(h, nd::slice_rows(means_, c, c + 1), nd::slice_rows(log_std, c, c + 1)));
  }
  Tensor joint = nd::concat_last(per_component) + nd::log_softmax(logits_);
  Tensor lse = nd::logsumexp_last(joint);
  const Matrix& v = lse.value();
  if ((v.array() < kLogDensityFloor).any()) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: mixture log-density below " << kLogDensityFloor << " floored (reported once)\n";
    }
  }
  return nd::clamp_min(lse, kLogDensityFloor);
}

Matrix MixtureOfGaussians::weights() const {
  nd::NoGradScope no_grad;
  return nd::softmax(logits_).value();
}

Matrix MixtureOfGaussians::sample(std::size_t n, nd::Rng& rng) const {
  const Matrix w = weights();
  std::discrete_distribution<Eigen::Index> pick(w.data(), w.data() + w.size());
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim()));
  const Matrix stds = log_stds_.value().cwiseMax(kLogStdMin).cwiseMin(kLogStdMax).array().exp().matrix();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Eigen::Index c = pick(rng);
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = means_.value()(c, j) + stds(c, j) * normal(rng);
  }
  return out;
}

void MixtureOfGaussians::collect(nd::NamedTensors& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".logits", logits_);
  out.emplace_back(prefix + ".means", means_);
  out.emplace_back(prefix + ".log_stds", log_stds_);
}

VariationalConditional::VariationalConditional(std::size_t cond_dim, std::size_t hidden, std::size_t latent_dim,
                                               nd::Rng& rng)
    : net_({cond_dim, hidden, 2 * latent_dim}, nd::Activation::kRelu, rng), latent_dim_(latent_dim) {}

GaussianLatent VariationalConditional::operator()(const Tensor& s) const {
  Tensor out = net_(s);
  return {nd::slice_last(out, 0, latent_dim_),
          nd::clamp(nd::slice_last(out, latent_dim_, 2 * latent_dim_), kLogStdMin, kLogStdMax)};
}

Tensor VariationalConditional::log_prob(const Tensor& s, const Tensor& h) const {
  auto g = (*this)(s);
  return diagonal_gaussian_log_prob(h, g.mean, g.log_std);
}

Tensor mi_upper_bound(const Tensor& s, const Tensor& h, const VariationalConditional& q_cond,
                      const MixtureOfGaussians& r) {
  if (s.rows() != h.rows()) throw nd::ShapeError("mi_upper_bound: S and H rows are not aligned");
  return nd::mean(q_cond.log_prob(s, h) - r.log_prob(h));
}

VariationalFitter::VariationalFitter(VariationalConditional q_cond, MixtureOfGaussians r, double lr)
    : q_cond_(std::move(q_cond)), r_(std::move(r)) {
  nd::NamedTensors qp;
  q_cond_.collect(qp, "q");
  nd::NamedTensors rp;
  r_.collect(rp, "r");
  q_adam_ = std::make_unique<nd::Adam>(nd::tensors_of(qp), nd::AdamOptions{lr});
  r_adam_ = std::make_unique<nd::Adam>(nd::tensors_of(rp), nd::AdamOptions{lr});
}

std::pair<double, double> VariationalFitter::fit(const Matrix& s, const Matrix& h, int steps) {
  if (steps < 1) throw std::invalid_argument("fit_variational: steps must be at least 1");
  Tensor st = Tensor::from_matrix(s);
  Tensor ht = Tensor::from_matrix(h);
  double q_loss = 0.0;
  double r_loss = 0.0;
  for (int i = 0; i < steps; ++i) {
    {
      nd::Tape tape;
      nd::TapeScope scope(tape);
      Tensor loss = -nd::mean(q_cond_.log_prob(st, ht));
      q_adam_->step(tape.backward(loss));
      q_loss = loss.item();
    }
    {
      nd::Tape tape;
      nd::TapeScope scope(tape);
      Tensor loss = -nd::mean(r_.log_prob(ht));
      r_adam_->step(tape.backward(loss));
      r_loss = loss.item();
    }
  }
  return {q_loss, r_loss};
}

std::pair<double, double> fit_variational(VariationalFitter& fitter, const Matrix& s, const Matrix& h, int steps) {
  return fitter.fit(s, h, steps);
}

}  // namespace mvd::disentangle
