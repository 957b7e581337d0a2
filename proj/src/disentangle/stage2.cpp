#include "mvd/disentangle/stage2.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mvd/ndgrad/ops.hpp"

namespace mvd::disentangle {

namespace nd = ndgrad;

CondMode parse_cond_mode(const std::string& name) {
  if (name == "pseudo-label") return CondMode::kPseudoLabel;
  if (name == "S") return CondMode::kConsistent;
  if (name == "both") return CondMode::kBoth;
  throw std::invalid_argument("unknown cond_mode '" + name + "' (expected pseudo-label, S or both)");
}

std::string to_string(CondMode mode) {
  switch (mode) {
    case CondMode::kPseudoLabel:
      return "pseudo-label";
    case CondMode::kConsistent:
      return "S";
    case CondMode::kBoth:
      return "both";
  }
  return "pseudo-label";
}

void Stage2Config::validate() const {
  if (latent_dim == 0) throw std::invalid_argument("Stage2Config: latent_dim must be positive");
  if (lambda_dis < 0.0) throw std::invalid_argument("Stage2Config: lambda_dis must be non-negative");
  if (epochs < 0) throw std::invalid_argument("Stage2Config: negative epoch count");
  if (!(lr > 0.0) || !(variational_lr > 0.0)) throw std::invalid_argument("Stage2Config: learning rates must be positive");
  if (inner_steps < 1) throw std::invalid_argument("Stage2Config: inner_steps must be at least 1");
  if (batch_size < 2) throw std::invalid_argument("Stage2Config: batch_size must be at least 2");
  if (q_hidden == 0) throw std::invalid_argument("Stage2Config: q_hidden must be positive");
}

namespace {

std::size_t cond_width(CondMode mode, int clusters, std::size_t consistent_dim) {
  const auto c = static_cast<std::size_t>(clusters);
  switch (mode) {
    case CondMode::kPseudoLabel:
      return c;
    case CondMode::kConsistent:
      return consistent_dim;
    case CondMode::kBoth:
      return c + consistent_dim;
  }
  return c;
}

}  // namespace

Stage2Model::Stage2Model(const std::vector<std::size_t>& view_dims, std::size_t consistent_dim, int num_clusters,
                         const Stage2Config& config, nd::Rng& rng)
    : config_(config), num_clusters_(num_clusters) {
  config.validate();
  if (num_clusters < 1) throw std::invalid_argument("Stage2Model: num_clusters must be positive");
  const std::size_t cond = cond_width(config.cond_mode, num_clusters, consistent_dim);
  const std::size_t components =
      config.mixture_components > 0 ? config.mixture_components : static_cast<std::size_t>(num_clusters);
  for (auto d : view_dims) {
    encoders_.emplace_back(d, config.hidden, config.latent_dim, rng);
    std::vector<std::size_t> hidden(config.hidden.rbegin(), config.hidden.rend());
    decoders_.emplace_back(config.latent_dim, cond, hidden, d, rng);
    fitters_.emplace_back(VariationalConditional(consistent_dim, config.q_hidden, config.latent_dim, rng),
                          MixtureOfGaussians(components, config.latent_dim, rng), config.variational_lr);
  }
  prototypes_ = Matrix::Zero(num_clusters, static_cast<Eigen::Index>(consistent_dim));
}

Matrix Stage2Model::condition(const std::vector<int>& labels, const Matrix& consistent) const {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix onehot = Matrix::Zero(n, num_clusters_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_clusters_) throw std::out_of_range("Stage2Model: label outside [0, C)");
    onehot(i, c) = 1.0;
  }
  switch (config_.cond_mode) {
    case CondMode::kPseudoLabel:
      return onehot;
    case CondMode::kConsistent:
      return consistent;
    case CondMode::kBoth: {
      Matrix both(n, onehot.cols() + consistent.cols());
      both << onehot, consistent;
      return both;
    }
  }
  return onehot;
}

nd::NamedTensors Stage2Model::cvae_parameters() const {
  nd::NamedTensors out;
  for (std::size_t v = 0; v < encoders_.size(); ++v) {
    encoders_[v].collect(out, "encoder." + std::to_string(v));
    decoders_[v].collect(out, "decoder." + std::to_string(v));
  }
  return out;
}

nd::NamedTensors Stage2Model::parameters() const {
  auto out = cvae_parameters();
  for (std::size_t v = 0; v < fitters_.size(); ++v) {
    fitters_[v].q_cond().collect(out, "q_cond." + std::to_string(v));
    fitters_[v].r().collect(out, "mixture." + std::to_string(v));
  }
  return out;
}

Stage2Trainer::Stage2Trainer(Stage2Inputs inputs, const Stage2Config& config)
    : inputs_(std::move(inputs)), config_(config), rng_(config.seed) {
  if (inputs_.data == nullptr) throw std::invalid_argument("Stage2Trainer: no data");
  const auto& data = *inputs_.data;
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  if (static_cast<Eigen::Index>(inputs_.pseudo_labels.size()) != n || inputs_.consistent.rows() != n) {
    throw std::invalid_argument("Stage2Trainer: stage-1 outputs are not aligned with the data");
  }
  std::vector<std::size_t> dims;
  for (std::size_t v = 0; v < data.num_views(); ++v) dims.push_back(data.view_dim(v));
  model_ = Stage2Model(dims, static_cast<std::size_t>(inputs_.consistent.cols()), inputs_.num_clusters, config, rng_);

  Matrix& s_all = inputs_.consistent;
  const Eigen::RowVectorXd mean = s_all.colwise().mean();
  s_all.rowwise() -= mean;
  Eigen::RowVectorXd scale = (s_all.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index c = 0; c < scale.size(); ++c) {
    if (!(scale(c) > 1e-12)) scale(c) = 1.0;
  }
  s_all.array().rowwise() /= scale.array();

  Matrix& proto = model_.class_prototypes();
  std::vector<double> counts(static_cast<std::size_t>(inputs_.num_clusters), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = inputs_.pseudo_labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= inputs_.num_clusters) throw std::out_of_range("Stage2Trainer: pseudo-label outside [0, C)");
    proto.row(c) += inputs_.consistent.row(i);
    counts[static_cast<std::size_t>(c)] += 1.0;
  }
  for (int c = 0; c < inputs_.num_clusters; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) proto.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  cond_all_ = model_.condition(inputs_.pseudo_labels, inputs_.consistent);
  adam_ = std::make_unique<nd::Adam>(nd::tensors_of(model_.cvae_parameters()), nd::AdamOptions{config.lr});
}

Stage2EpochRow Stage2Trainer::run_epoch() {
  const auto snapshot = state();
  const std::string rng_snapshot = rng_state();
  const auto& data = *inputs_.data;
  const std::size_t views = data.num_views();
  const int epoch = epoch_ + 1;
  Stage2EpochRow row;
  row.epoch = epoch;
  row.recon.assign(views, 0.0);
  row.kl.assign(views, 0.0);
  row.l_dis.assign(views, 0.0);
  std::vector<Stage2StepLog> logs;
  int step = 0;
  try {
    for (const auto& rows : datasets::minibatches(data.size(), config_.batch_size, rng_)) {
      const Matrix s_batch = datasets::gather_rows(inputs_.consistent, rows);
      const Tensor s = Tensor::from_matrix(s_batch);
      const Tensor cond = Tensor::from_matrix(datasets::gather_rows(cond_all_, rows));
      std::vector<Tensor> x;
      std::vector<Matrix> eps;
      for (std::size_t v = 0; v < views; ++v) {
        x.push_back(Tensor::from_matrix(datasets::gather_rows(data.views[v], rows)));
        eps.push_back(nd::random_normal(static_cast<Eigen::Index>(rows.size()),
                                        static_cast<Eigen::Index>(config_.latent_dim), rng_));
      }

      for (std::size_t v = 0; v < views; ++v) {
        Matrix h;
        {
          nd::NoGradScope no_grad;
          h = reparameterize(model_.encoder(v)(x[v]), eps[v]).value();
        }
        model_.fitter(v).fit(s_batch, h, config_.inner_steps);
      }

      nd::Tape tape;
      Tensor l_cvae;
      Tensor l_dis;
      Tensor l_spc;
      std::vector<double> recon(views), kl(views), dis(views);
      {
        nd::TapeScope scope(tape);
        for (std::size_t v = 0; v < views; ++v) {
          GaussianLatent latent = model_.encoder(v)(x[v]);
          Tensor h = reparameterize(latent, eps[v]);
          Tensor r = reconstruction_loss(x[v], model_.decoder(v)(h, cond));
          Tensor k = kl_std_normal(latent);
          Tensor d = mi_upper_bound(s, h, model_.fitter(v).q_cond(), model_.fitter(v).r());
          recon[v] = r.item();
          kl[v] = k.item();
          dis[v] = d.item();
          l_cvae = v == 0 ? r + k : l_cvae + r + k;
          l_dis = v == 0 ? d : l_dis + d;
        }
        l_spc = l_cvae + l_dis * config_.lambda_dis;
      }
      if (!std::isfinite(l_spc.item())) throw nd::DomainError("non-finite L_spc");
      adam_->step(tape.backward(l_spc));

      ++step;
      logs.push_back({epoch, step, l_cvae.item(), l_dis.item(), l_spc.item()});
      for (std::size_t v = 0; v < views; ++v) {
        row.recon[v] += recon[v];
        row.kl[v] += kl[v];
        row.l_dis[v] += dis[v];
      }
      row.l_cvae += l_cvae.item();
      row.l_dis_total += l_dis.item();
      row.l_spc += l_spc.item();
    }
  } catch (const nd::DomainError& e) {
    load_state(snapshot);
    set_rng_state(rng_snapshot);
    throw Stage2DivergenceError("stage 2 diverged at epoch " + std::to_string(epoch) +
                                " (model rolled back to the start of the epoch): " + e.what());
  }
  const double inv = step > 0 ? 1.0 / step : 0.0;
  for (std::size_t v = 0; v < views; ++v) {
    row.recon[v] *= inv;
    row.kl[v] *= inv;
    row.l_dis[v] *= inv;
  }
  row.l_cvae *= inv;
  row.l_dis_total *= inv;
  row.l_spc *= inv;
  epoch_ = epoch;
  step_log_.insert(step_log_.end(), logs.begin(), logs.end());
  curve_.push_back(row);
  return row;
}

void Stage2Trainer::train_until(int epochs) {
  while (epoch_ < epochs) run_epoch();
}

namespace {

void add_adam_state(nd::NamedTensors& out, const std::string& prefix, const nd::Adam& adam) {
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    out.emplace_back(prefix + ".m." + std::to_string(i), Tensor::from_matrix(adam.first_moments()[i]));
    out.emplace_back(prefix + ".v." + std::to_string(i), Tensor::from_matrix(adam.second_moments()[i]));
  }
  out.emplace_back(prefix + ".step", Tensor::scalar(static_cast<double>(adam.step_count())));
}

void load_adam_state(const std::map<std::string, const Tensor*>& by_name, const std::string& prefix, nd::Adam& adam) {
  auto find = [&](const std::string& name) -> const Matrix& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument("Stage2Trainer::load_state: missing tensor " + name);
    return it->second->value();
  };
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    const Matrix& m = find(prefix + ".m." + std::to_string(i));
    const Matrix& v = find(prefix + ".v." + std::to_string(i));
    if (m.rows() != adam.first_moments()[i].rows() || m.cols() != adam.first_moments()[i].cols()) {
      throw nd::ShapeError("Stage2Trainer::load_state: optimizer shape mismatch for " + prefix);
    }
    adam.first_moments()[i] = m;
    adam.second_moments()[i] = v;
  }
  adam.set_step_count(static_cast<std::uint64_t>(find(prefix + ".step")(0, 0)));
}

}  // namespace

nd::NamedTensors Stage2Trainer::state() const {
  auto out = model_.parameters();
  out.emplace_back("class_prototypes", Tensor::from_matrix(model_.class_prototypes()));
  add_adam_state(out, "adam.cvae", *adam_);
  for (std::size_t v = 0; v < model_.num_views(); ++v) {
    add_adam_state(out, "adam.q." + std::to_string(v), model_.fitter(v).q_optimizer());
    add_adam_state(out, "adam.r." + std::to_string(v), model_.fitter(v).r_optimizer());
  }
  out.emplace_back("trainer.epoch", Tensor::scalar(static_cast<double>(epoch_)));
  const std::size_t views = model_.num_views();
  Matrix curve(static_cast<Eigen::Index>(curve_.size()), static_cast<Eigen::Index>(3 * views + 4));
  for (std::size_t e = 0; e < curve_.size(); ++e) {
    const auto& row = curve_[e];
    auto r = curve.row(static_cast<Eigen::Index>(e));
    r(0) = row.epoch;
    for (std::size_t v = 0; v < views; ++v) {
      r(static_cast<Eigen::Index>(1 + v)) = row.recon[v];
      r(static_cast<Eigen::Index>(1 + views + v)) = row.kl[v];
      r(static_cast<Eigen::Index>(1 + 2 * views + v)) = row.l_dis[v];
    }
    r(static_cast<Eigen::Index>(3 * views + 1)) = row.l_cvae;
    r(static_cast<Eigen::Index>(3 * views + 2)) = row.l_dis_total;
    r(static_cast<Eigen::Index>(3 * views + 3)) = row.l_spc;
  }
  if (!curve_.empty()) out.emplace_back("trainer.curve", Tensor::from_matrix(curve));
  return out;
}

void Stage2Trainer::load_state(const nd::NamedTensors& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  auto find = [&](const std::string& name) -> const Matrix& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument("Stage2Trainer::load_state: missing tensor " + name);
    return it->second->value();
  };
  for (auto& [name, param] : model_.parameters()) {
    const Matrix& v = find(name);
    if (v.rows() != param.value().rows() || v.cols() != param.value().cols()) {
      throw nd::ShapeError("Stage2Trainer::load_state: shape mismatch for " + name);
    }
    param.mutable_value() = v;
  }
  const Matrix& proto = find("class_prototypes");
  if (proto.rows() != model_.class_prototypes().rows() || proto.cols() != model_.class_prototypes().cols()) {
    throw nd::ShapeError("Stage2Trainer::load_state: shape mismatch for class_prototypes");
  }
  model_.class_prototypes() = proto;
  load_adam_state(by_name, "adam.cvae", *adam_);
  for (std::size_t v = 0; v < model_.num_views(); ++v) {
    load_adam_state(by_name, "adam.q." + std::to_string(v), model_.fitter(v).q_optimizer());
    load_adam_state(by_name, "adam.r." + std::to_string(v), model_.fitter(v).r_optimizer());
  }
  epoch_ = static_cast<int>(find("trainer.epoch")(0, 0));
  const std::size_t views = model_.num_views();
  curve_.clear();
  if (by_name.count("trainer.curve") == 0) return;
  const Matrix& curve = find("trainer.curve");
  if (curve.cols() != static_cast<Eigen::Index>(3 * views + 4)) {
    throw nd::ShapeError("Stage2Trainer::load_state: shape mismatch for trainer.curve");
  }
  for (Eigen::Index e = 0; e < curve.rows(); ++e) {
    Stage2EpochRow row;
    row.epoch = static_cast<int>(curve(e, 0));
    for (std::size_t v = 0; v < views; ++v) {
      row.recon.push_back(curve(e, static_cast<Eigen::Index>(1 + v)));
      row.kl.push_back(curve(e, static_cast<Eigen::Index>(1 + views + v)));
      row.l_dis.push_back(curve(e, static_cast<Eigen::Index>(1 + 2 * views + v)));
    }
    row.l_cvae = curve(e, static_cast<Eigen::Index>(3 * views + 1));
    row.l_dis_total = curve(e, static_cast<Eigen::Index>(3 * views + 2));
    row.l_spc = curve(e, static_cast<Eigen::Index>(3 * views + 3));
    curve_.push_back(std::move(row));
  }
}

std::string Stage2Trainer::rng_state() const {
  std::ostringstream out;
  out << rng_;
  return out.str();
}

void Stage2Trainer::set_rng_state(const std::string& state) {
  std::istringstream in(state);
  in >> rng_;
  if (!in) throw std::invalid_argument("Stage2Trainer: unreadable RNG state");
}

Stage2Result stage2_train(const Stage2Inputs& inputs, const Stage2Config& config) {
  Stage2Trainer trainer(inputs, config);
  trainer.train_until(config.epochs);
  return {std::move(trainer.model()), trainer.curve(), trainer.step_log()};
}

std::vector<Matrix> specific_representations(const Stage2Model& model, const datasets::MultiViewBatch& data) {
  if (data.num_views() != model.num_views()) throw std::invalid_argument("specific_representations: view count mismatch");
  nd::NoGradScope no_grad;
  std::vector<Matrix> out;
  for (std::size_t v = 0; v < data.num_views(); ++v) {
    out.push_back(model.encoder(v)(Tensor::from_matrix(data.views[v])).mean.value());
  }
  return out;
}

Matrix conditional_sample(const Stage2Model& model, std::size_t view, int class_id, const std::optional<Matrix>& style,
                          std::size_t n, nd::Rng& rng) {
  if (class_id < 0 || class_id >= model.num_clusters()) {
    throw std::out_of_range("conditional_sample: class_id must lie in [0, C)");
  }
  if (view >= model.num_views()) throw std::out_of_range("conditional_sample: no such view");
  Matrix z = style ? *style : model.fitter(view).r().sample(n, rng);
  if (z.cols() != static_cast<Eigen::Index>(model.latent_dim())) {
    throw nd::ShapeError("conditional_sample: style width must equal d_z");
  }
  const auto rows = static_cast<std::size_t>(z.rows());
  const std::vector<int> labels(rows, class_id);
  Matrix consistent = model.class_prototypes().row(class_id).replicate(z.rows(), 1);
  nd::NoGradScope no_grad;
  return model.decoder(view)(Tensor::from_matrix(z), Tensor::from_matrix(model.condition(labels, consistent))).value();
}

void write_stage2_curve(const std::filesystem::path& path, const std::vector<Stage2EpochRow>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  const std::size_t views = curve.empty() ? 0 : curve.front().recon.size();
  out << "epoch";
  for (std::size_t v = 0; v < views; ++v) {
    out << ",recon_" << v << ",kl_" << v << ",L_cvae_" << v << ",L_dis_" << v;
  }
  out << ",L_cvae,L_dis,L_spc\n";
  for (const auto& row : curve) {
    out << row.epoch;
    for (std::size_t v = 0; v < views; ++v) {
      out << ',' << row.recon[v] << ',' << row.kl[v] << ',' << row.recon[v] + row.kl[v] << ',' << row.l_dis[v];
    }
    out << ',' << row.l_cvae << ',' << row.l_dis_total << ',' << row.l_spc << '\n';
  }
}

}  // namespace mvd::disentangle
