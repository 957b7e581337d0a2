#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvd/datasets/multiview.hpp"
#include "mvd/disentangle/variational.hpp"

namespace mvd::disentangle {

enum class CondMode { kPseudoLabel, kConsistent, kBoth };

CondMode parse_cond_mode(const std::string& name);
std::string to_string(CondMode mode);

struct Stage2Config {
  std::size_t latent_dim = 10;
  std::vector<std::size_t> hidden = {256};
  std::size_t q_hidden = 64;
  double lambda_dis = 0.02;
  int epochs = 150;
  double lr = 5e-4;
  double variational_lr = 1e-3;
  int inner_steps = 5;
  std::size_t batch_size = 128;
  CondMode cond_mode = CondMode::kPseudoLabel;
  /// 0 means one component per cluster.
  std::size_t mixture_components = 0;
  /// View noise constant; taken as negligible and never added to the objective.
  double view_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stage-1 artifacts the second stage conditions on. The trainer works on a
/// per-column standardized copy of `consistent`; prototypes live in that space.
struct Stage2Inputs {
  const datasets::MultiViewBatch* data = nullptr;
  std::vector<int> pseudo_labels;
  Matrix consistent;
  int num_clusters = 0;
};

/// Per-view CVAE plus the variational pieces of the MI bound.
class Stage2Model {
 public:
  Stage2Model() = default;
  Stage2Model(const std::vector<std::size_t>& view_dims, std::size_t consistent_dim, int num_clusters,
              const Stage2Config& config, ndgrad::Rng& rng);

  std::size_t num_views() const { return encoders_.size(); }
  std::size_t latent_dim() const { return config_.latent_dim; }
  int num_clusters() const { return num_clusters_; }
  CondMode cond_mode() const { return config_.cond_mode; }

  ViewEncoder& encoder(std::size_t v) { return encoders_.at(v); }
  const ViewEncoder& encoder(std::size_t v) const { return encoders_.at(v); }
  const ViewDecoder& decoder(std::size_t v) const { return decoders_.at(v); }
  VariationalFitter& fitter(std::size_t v) { return fitters_.at(v); }
  const VariationalFitter& fitter(std::size_t v) const { return fitters_.at(v); }

  /// Decoder conditioning rows for the given labels / consistent rows.
  Matrix condition(const std::vector<int>& labels, const Matrix& consistent) const;

  /// Mean S of the instances carrying each pseudo-label; used by S-conditioned generation.
  Matrix& class_prototypes() { return prototypes_; }
  const Matrix& class_prototypes() const { return prototypes_; }

  /// Encoder and decoder parameters (the ones the model step updates).
  ndgrad::NamedTensors cvae_parameters() const;
  /// Every tensor of the model including q_cond, r and the class prototypes.
  ndgrad::NamedTensors parameters() const;

 private:
  Stage2Config config_;
  int num_clusters_ = 0;
  std::vector<ViewEncoder> encoders_;
  std::vector<ViewDecoder> decoders_;
  std::vector<VariationalFitter> fitters_;
  Matrix prototypes_;
};

struct Stage2StepLog {
  int epoch = 0;
  int step = 0;
  double l_cvae = 0.0;
  double l_dis = 0.0;
  double l_spc = 0.0;
};

struct Stage2EpochRow {
  int epoch = 0;
  std::vector<double> recon;
  std::vector<double> kl;
  std::vector<double> l_dis;
  double l_cvae = 0.0;
  double l_dis_total = 0.0;
  double l_spc = 0.0;
};

class Stage2DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Alternating optimization. Each batch first fits q_cond and r for
/// inner_steps on detached samples, then takes one Adam step on the
/// encoders/decoders for L_cvae + lambda_dis * L_dis.
class Stage2Trainer {
 public:
  Stage2Trainer(Stage2Inputs inputs, const Stage2Config& config);

  /// Runs one epoch. On a non-finite loss the model is rolled back to the start
  /// of the epoch and Stage2DivergenceError is thrown.
  Stage2EpochRow run_epoch();
  /// Runs until `epochs` epochs have completed in total.
  void train_until(int epochs);

  int completed_epochs() const { return epoch_; }
  Stage2Model& model() { return model_; }
  const Stage2Model& model() const { return model_; }
  const std::vector<Stage2StepLog>& step_log() const { return step_log_; }
  const std::vector<Stage2EpochRow>& curve() const { return curve_; }

  /// Model tensors, optimizer moments and counters, and the epoch curve so far (absent before the first epoch;
  /// the per-step log is never part of it).
  ndgrad::NamedTensors state() const;
  /// Loads tensors produced by state(); names and shapes must match.
  void load_state(const ndgrad::NamedTensors& tensors);
  std::string rng_state() const;
  void set_rng_state(const std::string& state);

 private:
  Stage2Inputs inputs_;
  Stage2Config config_;
  ndgrad::Rng rng_;
  Stage2Model model_;
  std::unique_ptr<ndgrad::Adam> adam_;
  Matrix cond_all_;
  int epoch_ = 0;
  std::vector<Stage2StepLog> step_log_;
  std::vector<Stage2EpochRow> curve_;
};

struct Stage2Result {
  Stage2Model model;
  std::vector<Stage2EpochRow> curve;
  std::vector<Stage2StepLog> step_log;
};

Stage2Result stage2_train(const Stage2Inputs& inputs, const Stage2Config& config);

/// Posterior means P^(v) for every instance, one N x d_z block per view.
std::vector<Matrix> specific_representations(const Stage2Model& model, const datasets::MultiViewBatch& data);

/// Decodes [style ; cond(class_id)] for view v. `style` is n x d_z; when absent,
/// n styles are drawn from the fitted mixture r of that view.
Matrix conditional_sample(const Stage2Model& model, std::size_t view, int class_id, const std::optional<Matrix>& style,
                          std::size_t n, ndgrad::Rng& rng);

void write_stage2_curve(const std::filesystem::path& path, const std::vector<Stage2EpochRow>& curve);

}  // namespace mvd::disentangle
