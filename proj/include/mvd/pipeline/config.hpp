#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvd/consistency/stage1.hpp"
#include "mvd/datasets/synthetic.hpp"
#include "mvd/disentangle/stage2.hpp"

namespace mvd::pipeline {

enum class DatasetKind { kSynthetic, kEdgeMnist };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSynthetic;
  datasets::SyntheticSpec synthetic;
  /// Directory holding train-images-idx3-ubyte and train-labels-idx1-ubyte.
  std::string mnist_dir;
  std::size_t subset = 10000;
  std::uint64_t subset_seed = 0;
};

struct EvalConfig {
  double probe_train_fraction = 0.8;
  int kmeans_restarts = 10;
};

/// Everything that determines a run except the seed.
struct RunConfig {
  DatasetConfig dataset;
  consistency::Stage1Config stage1;
  /// L_spc on/off; off keeps the S-only representation.
  bool enable_spc = true;
  disentangle::Stage2Config stage2;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  /// Cross-field checks on top of the per-stage ones: cluster count matches the
  /// dataset, at least one objective is enabled, seeds nonempty.
  void validate() const;
  /// Copy with the per-stage seeds set to `seed`.
  RunConfig for_seed(std::uint64_t seed) const;
};

/// Defaults for the two-view Edge-MNIST setup (C = 10, occlusion augmentation).
RunConfig edge_mnist_defaults(const std::string& mnist_dir);

/// Full, explicit JSON form. Seeds of the stage blocks are not included; the
/// seed list is.
nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are an error.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);
/// Hex hash of the canonical dump of to_json without the seed list.
std::string config_hash(const RunConfig& config);
/// Hash of only the parts stage 1 depends on (dataset and stage-1 block).
std::string stage1_hash(const RunConfig& config);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvd::pipeline
