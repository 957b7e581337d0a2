#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvd/datasets/augment.hpp"
#include "mvd/datasets/multiview.hpp"
#include "mvd/ndgrad/nn.hpp"

namespace mvd::consistency {

using ndgrad::Matrix;
using ndgrad::Tensor;

struct Stage1Config {
  std::vector<std::size_t> hidden = {512, 256};
  std::size_t embed_dim = 64;
  std::size_t proj_dim = 32;
  int num_clusters = 4;
  double tau = 0.5;
  double lambda_clu = 2.0;
  int epochs_pretrain = 50;
  int epochs_cluster = 30;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  bool use_knn = false;
  std::size_t knn_k = 5;
  bool enable_ins = true;
  bool enable_clu = true;
  datasets::AugmentationPolicy augmentation{0.05, 0.1, 0.9, 1.1};
  std::uint64_t seed = 0;

  void validate() const;
};

/// E_c shared by all views (one encoder per view when view widths differ),
/// contrastive head f and clustering head g.
class ConsistentModel {
 public:
  ConsistentModel() = default;
  ConsistentModel(const std::vector<std::size_t>& view_dims, const Stage1Config& config, ndgrad::Rng& rng);

  Tensor embed(std::size_t view, const Tensor& x) const;
  /// L2-normalized contrastive vectors f(E_c(x)).
  Tensor project(const Tensor& embedding) const;
  /// Softmax cluster assignment g(E_c(x)).
  Tensor assign(const Tensor& embedding) const;

  std::size_t embed_dim() const { return encoders_.front().out_features(); }
  std::size_t num_clusters() const { return cluster_head_.out_features(); }
  bool shared_encoder() const { return encoders_.size() == 1; }

  ndgrad::NamedTensors encoder_parameters() const;
  ndgrad::NamedTensors contrastive_parameters() const;
  ndgrad::NamedTensors cluster_parameters() const;
  ndgrad::NamedTensors parameters() const;

  ndgrad::Linear& cluster_head() { return cluster_head_; }

 private:
  std::vector<ndgrad::Mlp> encoders_;
  ndgrad::Mlp contrastive_head_;
  ndgrad::Linear cluster_head_;
};

using NeighborIndex = std::vector<std::vector<std::size_t>>;

/// Exact K nearest neighbours under cosine distance, ties broken by lower id.
/// An instance is never its own neighbour.
NeighborIndex mine_neighbors(const Matrix& embeddings, std::size_t k);

struct ClusterAssignment {
  Matrix probs;
  std::vector<int> hard;
};

/// Row-wise argmax with lowest-index tie-break.
std::vector<int> argmax_rows(const Matrix& probs);

struct Stage1Output {
  /// Fused assignment: mean of the per-view probabilities.
  ClusterAssignment fused;
  std::vector<ClusterAssignment> per_view;
  std::vector<Matrix> view_embeddings;
  /// Mean over views of E_c(x_v).
  Matrix consistent;
};

/// Deterministic inference pass of g o E_c over the whole dataset.
Stage1Output assign_pseudolabels(const ConsistentModel& model, const datasets::MultiViewBatch& data);

struct Stage1CurveRow {
  std::string phase;
  int epoch = 0;
  double l_ins = 0.0;
  double l_clu = 0.0;
  /// Entropy of the batch-mean assignment, averaged over views.
  double entropy = 0.0;
};

/// Loss became non-finite during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Stage1Result {
  ConsistentModel model;
  std::vector<Stage1CurveRow> curve;
};

/// Phase A minimizes the contrastive loss for epochs_pretrain epochs, then
/// phase B minimizes the clustering loss for epochs_cluster epochs. Either
/// phase is skipped when its flag is off.
Stage1Result stage1_train(const datasets::MultiViewBatch& data, const Stage1Config& config);

void write_stage1_curve(const std::filesystem::path& path, const std::vector<Stage1CurveRow>& curve);

}  // namespace mvd::consistency
