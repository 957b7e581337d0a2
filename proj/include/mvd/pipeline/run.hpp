#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvd/evaluate/metrics.hpp"
#include "mvd/pipeline/config.hpp"
#include "mvd/disentangle/stage2.hpp"

namespace mvd::pipeline {

struct RunOptions {
  std::filesystem::path out_root = "runs";
  /// Reuse a stage-1 checkpoint trained under the same dataset/stage-1 settings and seed.
  bool reuse_stage1 = true;
  /// Return the stored record when runs/<hash>/<seed>/metrics.jsonl already exists.
  bool reuse_results = false;
  /// Continue stage 2 from runs/<hash>/<seed>/stage2.ckpt when present.
  bool resume = true;
  /// Stage-2 checkpoint cadence in epochs (0: only at the end).
  int checkpoint_every = 25;
  /// Dump the final representation as representation.jsonl.
  bool write_representation = true;
  /// Progress lines go here when set.
  std::ostream* log = nullptr;
};

struct SeedReport {
  evaluate::MetricsRecord metrics;
  /// Extra measurements, e.g. pseudo_acc, probe_S, probe_P0, r2_P0, r2_S0, acc_clu_S.
  std::map<std::string, double> diagnostics;
  std::filesystem::path dir;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

struct RunReport {
  std::string config_hash;
  std::vector<SeedReport> seeds;
  /// Mean and (population) standard deviation over seeds of every metric and diagnostic.
  std::map<std::string, Summary> summary;
};

/// A stage failed; the message carries the stage and seed.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loads the configured dataset (generated or read from IDX files).
datasets::MultiViewBatch load_run_dataset(const RunConfig& config);

/// One seed: stage 1 (or its cached checkpoint), pseudo-labels, stage 2,
/// representation [S ; P^(1) ; ... ; P^(V)], k-means metrics and linear probe.
/// Writes stage1.ckpt, stage2.ckpt, curve CSVs, representation.jsonl (optional) and
/// metrics.jsonl under out_root/<config hash>/<seed>/.
SeedReport run_seed(const RunConfig& config, const datasets::MultiViewBatch& data, std::uint64_t seed,
                    const RunOptions& options);

/// Stage-2 model of a finished seed, rebuilt from the cached stage-1 and stage-2
/// checkpoints under options.out_root. Throws PipelineError when either is missing.
disentangle::Stage2Model trained_model(const RunConfig& config, const datasets::MultiViewBatch& data,
                                       std::uint64_t seed, const RunOptions& options);

/// Every seed of the config, plus config.json and summary.csv in the run directory.
RunReport run_pipeline(const RunConfig& config, const RunOptions& options);

std::map<std::string, Summary> summarize(const std::vector<SeedReport>& seeds);

struct AblationRow {
  bool ins = false;
  bool clu = false;
  bool spc = false;
  RunReport report;
};

/// The seven trainable rows of the component table in its order:
/// (ins,clu,spc) = 111, 101, 011, 001, 100, 010, 110.
std::vector<AblationRow> run_ablation(const RunConfig& config, const RunOptions& options);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

enum class SweepParam { kLambdaDis, kLatentDim, kBatch, kEpochs };
SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam param);
/// Config with the swept parameter set to `value` (batch and epochs apply to stage 2).
RunConfig with_param(const RunConfig& config, SweepParam param, double value);

struct SweepPoint {
  double value = 0.0;
  RunReport report;
};

std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepParam param, const std::vector<double>& grid,
                                  const RunOptions& options);
void write_sweep_csv(const std::filesystem::path& path, SweepParam param, const std::vector<SweepPoint>& points);
/// Grid value with the highest mean acc_clu; ties go to the earliest grid entry.
double sweep_argmax(const std::vector<SweepPoint>& points);

}  // namespace mvd::pipeline
