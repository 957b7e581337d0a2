#include "mvd/consistency/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mvd/consistency/losses.hpp"
#include "mvd/ndgrad/adam.hpp"
#include "mvd/ndgrad/ops.hpp"

namespace mvd::consistency {

namespace nd = ndgrad;

void Stage1Config::validate() const {
  if (embed_dim == 0 || proj_dim == 0) throw std::invalid_argument("Stage1Config: zero-width layer");
  if (num_clusters < 2) throw std::invalid_argument("Stage1Config: num_clusters must be at least 2");
  if (!(tau > 0.0)) throw std::invalid_argument("Stage1Config: tau must be positive");
  if (lambda_clu < 0.0) throw std::invalid_argument("Stage1Config: lambda_clu must be non-negative");
  if (epochs_pretrain < 0 || epochs_cluster < 0) throw std::invalid_argument("Stage1Config: negative epoch count");
  if (batch_size < 2) throw std::invalid_argument("Stage1Config: batch_size must be at least 2");
  if (!(lr > 0.0)) throw std::invalid_argument("Stage1Config: lr must be positive");
  if (use_knn && knn_k == 0) throw std::invalid_argument("Stage1Config: knn_k must be positive");
  augmentation.validate();
}

ConsistentModel::ConsistentModel(const std::vector<std::size_t>& view_dims, const Stage1Config& config,
                                 nd::Rng& rng) {
  if (view_dims.empty()) throw std::invalid_argument("ConsistentModel: no views");
  const bool same = std::all_of(view_dims.begin(), view_dims.end(), [&](auto d) { return d == view_dims.front(); });
  const std::size_t encoders = same ? 1 : view_dims.size();
  for (std::size_t v = 0; v < encoders; ++v) {
    std::vector<std::size_t> widths{view_dims[v]};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(config.embed_dim);
    encoders_.emplace_back(widths, nd::Activation::kRelu, rng);
  }
  contrastive_head_ = nd::Mlp({config.embed_dim, config.embed_dim, config.proj_dim}, nd::Activation::kRelu, rng);
  cluster_head_ = nd::Linear(config.embed_dim, static_cast<std::size_t>(config.num_clusters), rng);
}

Tensor ConsistentModel::embed(std::size_t view, const Tensor& x) const {
  return encoders_[shared_encoder() ? 0 : view](x);
}

Tensor ConsistentModel::project(const Tensor& embedding) const {
  return nd::l2_normalize(contrastive_head_(embedding));
}

Tensor ConsistentModel::assign(const Tensor& embedding) const { return nd::softmax(cluster_head_(embedding)); }

nd::NamedTensors ConsistentModel::encoder_parameters() const {
  nd::NamedTensors out;
  for (std::size_t v = 0; v < encoders_.size(); ++v) encoders_[v].collect(out, "encoder." + std::to_string(v));
  return out;
}

nd::NamedTensors ConsistentModel::contrastive_parameters() const {
  nd::NamedTensors out;
  contrastive_head_.collect(out, "contrastive_head");
  return out;
}

nd::NamedTensors ConsistentModel::cluster_parameters() const {
  nd::NamedTensors out;
  cluster_head_.collect(out, "cluster_head");
  return out;
}

nd::NamedTensors ConsistentModel::parameters() const {
  auto out = encoder_parameters();
  for (auto& p : contrastive_parameters()) out.push_back(p);
  for (auto& p : cluster_parameters()) out.push_back(p);
  return out;
}

NeighborIndex mine_neighbors(const Matrix& embeddings, std::size_t k) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (k == 0) throw std::invalid_argument("mine_neighbors: K must be positive");
  if (k >= n) throw std::invalid_argument("mine_neighbors: K must be smaller than N");
  Matrix unit = embeddings;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const double norm = unit.row(r).norm();
    if (norm > 0.0) unit.row(r) /= norm;
  }
  const Matrix sim = unit * unit.transpose();
  NeighborIndex out(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const auto row = static_cast<Eigen::Index>(i);
    auto closer = [&](std::size_t a, std::size_t b) {
      const double sa = sim(row, static_cast<Eigen::Index>(a));
      const double sb = sim(row, static_cast<Eigen::Index>(b));
      return sa != sb ? sa > sb : a < b;
    };
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
    out[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    order.resize(n);
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Stage1Output assign_pseudolabels(const ConsistentModel& model, const datasets::MultiViewBatch& data) {
  data.validate();
  nd::NoGradScope no_grad;
  Stage1Output out;
  const auto n = static_cast<Eigen::Index>(data.size());
  out.consistent = Matrix::Zero(n, static_cast<Eigen::Index>(model.embed_dim()));
  Matrix fused = Matrix::Zero(n, static_cast<Eigen::Index>(model.num_clusters()));
  for (std::size_t v = 0; v < data.num_views(); ++v) {
    Tensor e = model.embed(v, Tensor::from_matrix(data.views[v]));
    Matrix probs = model.assign(e).value();
    out.consistent += e.value();
    fused += probs;
    out.view_embeddings.push_back(e.value());
    out.per_view.push_back({probs, argmax_rows(probs)});
  }
  const double inv_v = 1.0 / static_cast<double>(data.num_views());
  out.consistent *= inv_v;
  fused *= inv_v;
  out.fused = {fused, argmax_rows(fused)};
  return out;
}

namespace {

double entropy_of(const Tensor& neg_entropy) { return -neg_entropy.item(); }

void check_finite(double value, const std::string& phase, int epoch) {
  if (!std::isfinite(value)) {
    throw DivergenceError("stage 1 diverged: non-finite loss in phase " + phase + " at epoch " + std::to_string(epoch));
  }
}

}  // namespace

Stage1Result stage1_train(const datasets::MultiViewBatch& data, const Stage1Config& config) {
  config.validate();
  data.validate();
  nd::Rng rng(config.seed);
  std::vector<std::size_t> dims;
  for (std::size_t v = 0; v < data.num_views(); ++v) dims.push_back(data.view_dim(v));
  Stage1Result result{ConsistentModel(dims, config, rng), {}};
  auto& model = result.model;
  const std::size_t n = data.size();
  const std::size_t views = data.num_views();

  if (config.enable_ins) {
    auto params = model.encoder_parameters();
    for (auto& p : model.contrastive_parameters()) params.push_back(p);
    nd::Adam adam(nd::tensors_of(params), {config.lr});
    for (int epoch = 1; epoch <= config.epochs_pretrain; ++epoch) {
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& rows : datasets::minibatches(n, config.batch_size, rng)) {
        std::vector<Tensor> z;
        nd::Tape tape;
        Tensor loss;
        try {
          nd::TapeScope scope(tape);
          for (std::size_t v = 0; v < views; ++v) {
            const Matrix x = datasets::gather_rows(data.views[v], rows);
            for (int copy = 0; copy < 2; ++copy) {
              Tensor xa = Tensor::from_matrix(datasets::augment_block(x, config.augmentation, rng));
              z.push_back(model.project(model.embed(v, xa)));
            }
          }
          loss = contrastive_loss(z, config.tau, 2);
        } catch (const nd::DomainError& e) {
          throw DivergenceError(std::string("stage 1 diverged in phase A at epoch ") + std::to_string(epoch) + ": " +
                                e.what());
        }
        check_finite(loss.item(), "A", epoch);
        adam.step(tape.backward(loss));
        total += loss.item();
        ++count;
      }
      result.curve.push_back({"pretrain", epoch, total / static_cast<double>(count), 0.0, 0.0});
    }
  }

  if (config.enable_clu) {
    NeighborIndex neighbors;
    if (config.use_knn) {
      auto s = assign_pseudolabels(model, data).consistent;
      neighbors = mine_neighbors(s, std::min(config.knn_k, n - 1));
    }
    auto params = model.encoder_parameters();
    for (auto& p : model.cluster_parameters()) params.push_back(p);
    nd::Adam adam(nd::tensors_of(params), {config.lr});
    for (int epoch = 1; epoch <= config.epochs_cluster; ++epoch) {
      double total = 0.0;
      double entropy = 0.0;
      std::size_t count = 0;
      for (const auto& rows : datasets::minibatches(n, config.batch_size, rng)) {
        std::vector<std::size_t> partner;
        if (config.use_knn) {
          for (auto r : rows) {
            const auto& nb = neighbors[r];
            partner.push_back(nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]);
          }
        }
        nd::Tape tape;
        ClusteringLossParts parts;
        try {
          nd::TapeScope scope(tape);
          std::vector<Tensor> assign;
          std::vector<std::pair<Tensor, Tensor>> extra;
          for (std::size_t v = 0; v < views; ++v) {
            Tensor xa = Tensor::from_matrix(datasets::augment_block(datasets::gather_rows(data.views[v], rows), config.augmentation, rng));
            assign.push_back(model.assign(model.embed(v, xa)));
            if (config.use_knn) {
              Tensor xn =
                  Tensor::from_matrix(datasets::augment_block(datasets::gather_rows(data.views[v], partner), config.augmentation, rng));
              extra.emplace_back(assign.back(), model.assign(model.embed(v, xn)));
            }
          }
          parts = clustering_loss(assign, config.lambda_clu, extra);
        } catch (const nd::DomainError& e) {
          throw DivergenceError(std::string("stage 1 diverged in phase B at epoch ") + std::to_string(epoch) + ": " +
                                e.what());
        }
        check_finite(parts.total.item(), "B", epoch);
        adam.step(tape.backward(parts.total));
        total += parts.total.item();
        entropy += entropy_of(parts.negative_entropy);
        ++count;
      }
      const double c = static_cast<double>(count);
      result.curve.push_back({"cluster", epoch, 0.0, total / c, entropy / c});
    }
  }
  return result;
}

void write_stage1_curve(const std::filesystem::path& path, const std::vector<Stage1CurveRow>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "phase,epoch,L_ins,L_clu,entropy\n";
  for (const auto& r : curve) out << r.phase << ',' << r.epoch << ',' << r.l_ins << ',' << r.l_clu << ',' << r.entropy << '\n';
}

}  // namespace mvd::consistency
