#include "mvd/pipeline/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mvd/datasets/dataset_io.hpp"
#include "mvd/datasets/idx.hpp"
#include "mvd/evaluate/kmeans.hpp"
#include "mvd/evaluate/probe.hpp"
#include "mvd/pipeline/checkpoint.hpp"

namespace mvd::pipeline {

namespace fs = std::filesystem;
namespace nd = ndgrad;
using nlohmann::json;
using ndgrad::Matrix;

namespace {

void say(const RunOptions& options, const std::string& line) {
  if (options.log != nullptr) *options.log << line << std::endl;
}

std::string seed_tag(const std::string& stage, std::uint64_t seed) {
  return stage + " (seed " + std::to_string(seed) + ")";
}

Matrix curve_matrix(const std::vector<consistency::Stage1CurveRow>& curve) {
  Matrix m(static_cast<Eigen::Index>(curve.size()), 5);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& r = curve[i];
    m.row(static_cast<Eigen::Index>(i)) << (r.phase == "pretrain" ? 0.0 : 1.0), r.epoch, r.l_ins, r.l_clu, r.entropy;
  }
  return m;
}

std::vector<consistency::Stage1CurveRow> curve_rows(const Matrix& m) {
  std::vector<consistency::Stage1CurveRow> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back({m(i, 0) == 0.0 ? "pretrain" : "cluster", static_cast<int>(m(i, 1)), m(i, 2), m(i, 3), m(i, 4)});
  }
  return out;
}

consistency::Stage1Result stage1_cached(const RunConfig& config, const datasets::MultiViewBatch& data,
                                        std::uint64_t seed, const RunOptions& options) {
  const fs::path path = options.out_root / "stage1" / stage1_hash(config) / std::to_string(seed) / "stage1.ckpt";
  const std::string hash = stage1_hash(config);
  if (options.reuse_stage1 && fs::exists(path)) {
    Checkpoint c = load_checkpoint(path);
    if (c.module != "stage1" || c.config_hash != hash) throw CheckpointError(path.string() + ": not this stage-1 run");
    std::vector<std::size_t> dims;
    for (std::size_t v = 0; v < data.num_views(); ++v) dims.push_back(data.view_dim(v));
    nd::Rng rng(seed);
    consistency::Stage1Result result{consistency::ConsistentModel(dims, config.stage1, rng), {}};
    if (c.tensors.empty() || c.tensors.back().first != "curve") throw CheckpointError(path.string() + ": no curve");
    result.curve = curve_rows(c.tensors.back().second);
    c.tensors.pop_back();
    restore(result.model.parameters(), c.tensors);
    say(options, "stage 1 reused from " + path.string());
    return result;
  }
  auto result = consistency::stage1_train(data, config.stage1);
  Checkpoint c{"stage1", hash, "", snapshot(result.model.parameters())};
  c.tensors.emplace_back("curve", curve_matrix(result.curve));
  save_checkpoint(path, c);
  return result;
}

Matrix concat_columns(const Matrix& s, const std::vector<Matrix>& blocks) {
  Eigen::Index cols = s.cols();
  for (const auto& b : blocks) cols += b.cols();
  Matrix out(s.rows(), cols);
  out.leftCols(s.cols()) = s;
  Eigen::Index at = s.cols();
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

json record_json(const SeedReport& r) {
  const auto& m = r.metrics;
  return {{"acc_clu", m.acc_clu},   {"nmi", m.nmi},         {"ari", m.ari},
          {"acc_cls", m.acc_cls},   {"f_score", m.f_score}, {"seed", m.seed},
          {"config_hash", m.config_hash}, {"wall_seconds", m.wall_seconds}, {"diagnostics", r.diagnostics}};
}

SeedReport record_from_json(const json& j) {
  SeedReport r;
  r.metrics.acc_clu = j.at("acc_clu").get<double>();
  r.metrics.nmi = j.at("nmi").get<double>();
  r.metrics.ari = j.at("ari").get<double>();
  r.metrics.acc_cls = j.at("acc_cls").get<double>();
  r.metrics.f_score = j.at("f_score").get<double>();
  r.metrics.seed = j.at("seed").get<std::uint64_t>();
  r.metrics.config_hash = j.at("config_hash").get<std::string>();
  r.metrics.wall_seconds = j.at("wall_seconds").get<double>();
  r.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
  return r;
}

void train_stage2(disentangle::Stage2Trainer& trainer, const RunConfig& config, const std::string& hash,
                  const fs::path& ckpt, const RunOptions& options) {
  auto save = [&] {
    save_checkpoint(ckpt, {"stage2", hash, trainer.rng_state(), snapshot(trainer.state())});
  };
  if (options.resume && fs::exists(ckpt)) {
    Checkpoint c = load_checkpoint(ckpt);
    if (c.module == "stage2" && c.config_hash == hash) {
      nd::NamedTensors tensors;
      for (auto& [name, m] : c.tensors) tensors.emplace_back(name, nd::Tensor::from_matrix(m));
      trainer.load_state(tensors);
      trainer.set_rng_state(c.rng_state);
      say(options, "stage 2 resumed at epoch " + std::to_string(trainer.completed_epochs()));
    }
  }
  const int epochs = config.stage2.epochs;
  const int every = options.checkpoint_every;
  while (trainer.completed_epochs() < epochs) {
    const int done = trainer.completed_epochs();
    const int target = every > 0 ? std::min(epochs, (done / every + 1) * every) : epochs;
    try {
      trainer.train_until(target);
    } catch (const disentangle::Stage2DivergenceError&) {
      save();
      throw;
    }
    save();
    if (!trainer.curve().empty()) {
      const auto& row = trainer.curve().back();
      std::ostringstream line;
      line << "stage 2 epoch " << row.epoch << " L_cvae " << row.l_cvae << " L_dis " << row.l_dis_total << " L_spc "
           << row.l_spc;
      say(options, line.str());
    }
  }
}

}  // namespace

datasets::MultiViewBatch load_run_dataset(const RunConfig& config) {
  if (config.dataset.kind == DatasetKind::kSynthetic) return datasets::gen_synthetic(config.dataset.synthetic);
  const fs::path dir = config.dataset.mnist_dir;
  auto raw = datasets::load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  return datasets::make_edge_dataset(raw, config.dataset.subset, config.dataset.subset_seed);
}

SeedReport run_seed(const RunConfig& base, const datasets::MultiViewBatch& data, std::uint64_t seed,
                    const RunOptions& options) {
  base.validate();
  if (!data.labels) throw PipelineError("run_seed: the dataset has no labels to evaluate against");
  const RunConfig config = base.for_seed(seed);
  const std::string hash = config_hash(config);
  const fs::path dir = options.out_root / hash / std::to_string(seed);
  const fs::path metrics_path = dir / "metrics.jsonl";
  if (options.reuse_results && fs::exists(metrics_path)) {
    std::ifstream in(metrics_path);
    std::string line, last;
    while (std::getline(in, line)) {
      if (!line.empty()) last = line;
    }
    if (!last.empty()) {
      SeedReport r = record_from_json(json::parse(last));
      r.dir = dir;
      say(options, "seed " + std::to_string(seed) + " reused from " + metrics_path.string());
      return r;
    }
  }
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto& labels = *data.labels;
  const int c = config.stage1.num_clusters;
  SeedReport report;
  report.dir = dir;

  say(options, "seed " + std::to_string(seed) + ": stage 1");
  consistency::Stage1Result s1;
  try {
    s1 = stage1_cached(config, data, seed, options);
  } catch (const std::exception& e) {
    throw PipelineError(seed_tag("stage 1", seed) + ": " + e.what());
  }
  consistency::write_stage1_curve(dir / "stage1_curve.csv", s1.curve);
  const auto out = consistency::assign_pseudolabels(s1.model, data);
  std::vector<int> pseudo = out.fused.hard;
  if (!config.stage1.enable_clu) {
    pseudo = evaluate::kmeans(out.consistent, c, seed, {config.eval.kmeans_restarts}).labels;
  }
  report.diagnostics["pseudo_acc"] = evaluate::hungarian_acc(pseudo, labels);

  std::vector<Matrix> specific;
  if (config.enable_spc) {
    say(options, "seed " + std::to_string(seed) + ": stage 2");
    try {
      disentangle::Stage2Trainer trainer({&data, pseudo, out.consistent, c}, config.stage2);
      train_stage2(trainer, config, hash, dir / "stage2.ckpt", options);
      disentangle::write_stage2_curve(dir / "stage2_curve.csv", trainer.curve());
      specific = disentangle::specific_representations(trainer.model(), data);
    } catch (const std::exception& e) {
      throw PipelineError(seed_tag("stage 2", seed) + ": " + e.what());
    }
  }

  const Matrix representation = concat_columns(out.consistent, specific);
  const auto km = evaluate::kmeans(representation, c, seed, {config.eval.kmeans_restarts});
  auto& m = report.metrics;
  m.acc_clu = evaluate::hungarian_acc(km.labels, labels);
  m.nmi = evaluate::nmi(km.labels, labels);
  m.ari = evaluate::ari(km.labels, labels);
  const auto probe = evaluate::linear_probe_split(representation, labels, seed, config.eval.probe_train_fraction);
  m.acc_cls = probe.accuracy;
  m.f_score = probe.macro_f1;
  m.seed = seed;
  m.config_hash = hash;

  auto& diag = report.diagnostics;
  diag["repr_width"] = static_cast<double>(representation.cols());
  diag["acc_clu_S"] =
      evaluate::hungarian_acc(evaluate::kmeans(out.consistent, c, seed, {config.eval.kmeans_restarts}).labels, labels);
  diag["probe_S"] = evaluate::linear_probe_split(out.consistent, labels, seed, config.eval.probe_train_fraction).accuracy;
  for (std::size_t v = 0; v < specific.size(); ++v) {
    const std::string tag = std::to_string(v);
    diag["probe_P" + tag] =
        evaluate::linear_probe_split(specific[v], labels, seed, config.eval.probe_train_fraction).accuracy;
  }
  if (data.gt_specific) {
    for (std::size_t v = 0; v < data.num_views(); ++v) {
      const std::string tag = std::to_string(v);
      diag["r2_S" + tag] = evaluate::linear_regression_r2(out.consistent, (*data.gt_specific)[v]);
      if (v < specific.size()) diag["r2_P" + tag] = evaluate::linear_regression_r2(specific[v], (*data.gt_specific)[v]);
    }
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.validate();

  if (options.write_representation) {
    datasets::MultiViewBatch dump;
    dump.views = {representation};
    dump.labels = labels;
    dump.ids = data.ids;
    datasets::save_dataset(dir / "representation.jsonl", dump, {c, seed});
  }
  {
    std::ofstream metrics(metrics_path, std::ios::trunc);
    metrics << record_json(report).dump() << '\n';
  }
  std::ostringstream line;
  line << "seed " << seed << ": acc_clu " << m.acc_clu << " nmi " << m.nmi << " ari " << m.ari << " acc_cls "
       << m.acc_cls;
  say(options, line.str());
  return report;
}

disentangle::Stage2Model trained_model(const RunConfig& base, const datasets::MultiViewBatch& data,
                                       std::uint64_t seed, const RunOptions& options) {
  base.validate();
  if (!base.enable_spc) throw PipelineError("trained_model: stage 2 is disabled in this config");
  const RunConfig config = base.for_seed(seed);
  const std::string hash = config_hash(config);
  const fs::path s1 = options.out_root / "stage1" / stage1_hash(config) / std::to_string(seed) / "stage1.ckpt";
  const fs::path s2 = options.out_root / hash / std::to_string(seed) / "stage2.ckpt";
  if (!fs::exists(s1) || !fs::exists(s2)) {
    throw PipelineError("trained_model: no finished run for seed " + std::to_string(seed) + " under " +
                        options.out_root.string());
  }
  RunOptions reuse = options;
  reuse.reuse_stage1 = true;
  reuse.log = nullptr;
  const auto stage1 = stage1_cached(config, data, seed, reuse);
  const auto out = consistency::assign_pseudolabels(stage1.model, data);
  std::vector<int> pseudo = out.fused.hard;
  if (!config.stage1.enable_clu) {
    pseudo = evaluate::kmeans(out.consistent, config.stage1.num_clusters, seed, {config.eval.kmeans_restarts}).labels;
  }
  disentangle::Stage2Trainer trainer({&data, pseudo, out.consistent, config.stage1.num_clusters}, config.stage2);
  const Checkpoint c = load_checkpoint(s2);
  if (c.module != "stage2" || c.config_hash != hash) throw PipelineError(s2.string() + ": not this run's checkpoint");
  nd::NamedTensors tensors;
  for (const auto& [name, m] : c.tensors) tensors.emplace_back(name, nd::Tensor::from_matrix(m));
  trainer.load_state(tensors);
  if (trainer.completed_epochs() != config.stage2.epochs) {
    throw PipelineError(s2.string() + ": stage 2 stopped at epoch " + std::to_string(trainer.completed_epochs()));
  }
  return std::move(trainer.model());
}

std::map<std::string, Summary> summarize(const std::vector<SeedReport>& seeds) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& s : seeds) {
    values["acc_clu"].push_back(s.metrics.acc_clu);
    values["nmi"].push_back(s.metrics.nmi);
    values["ari"].push_back(s.metrics.ari);
    values["acc_cls"].push_back(s.metrics.acc_cls);
    values["f_score"].push_back(s.metrics.f_score);
    values["wall_seconds"].push_back(s.metrics.wall_seconds);
    for (const auto& [k, v] : s.diagnostics) values[k].push_back(v);
  }
  std::map<std::string, Summary> out;
  for (const auto& [k, vs] : values) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double var = 0.0;
    for (double v : vs) var += (v - mean) * (v - mean);
    out[k] = {mean, std::sqrt(var / static_cast<double>(vs.size()))};
  }
  return out;
}

RunReport run_pipeline(const RunConfig& config, const RunOptions& options) {
  config.validate();
  RunReport report;
  report.config_hash = config_hash(config);
  const fs::path dir = options.out_root / report.config_hash;
  fs::create_directories(dir);
  save_config(dir / "config.json", config);
  const auto data = load_run_dataset(config);
  for (auto seed : config.seeds) report.seeds.push_back(run_seed(config, data, seed, options));
  report.summary = summarize(report.seeds);
  std::ofstream csv(dir / "summary.csv");
  csv << "metric,mean,std\n";
  for (const auto& [k, s] : report.summary) csv << k << ',' << s.mean << ',' << s.std << '\n';
  return report;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const RunOptions& options) {
  static constexpr bool kRows[7][3] = {{true, true, true},  {true, false, true}, {false, true, true},
                                       {false, false, true}, {true, false, false}, {false, true, false},
                                       {true, true, false}};
  std::vector<AblationRow> rows;
  for (const auto& r : kRows) {
    RunConfig c = config;
    c.stage1.enable_ins = r[0];
    c.stage1.enable_clu = r[1];
    c.enable_spc = r[2];
    say(options, std::string("ablation row ins=") + (r[0] ? "1" : "0") + " clu=" + (r[1] ? "1" : "0") +
                     " spc=" + (r[2] ? "1" : "0"));
    rows.push_back({r[0], r[1], r[2], run_pipeline(c, options)});
  }
  return rows;
}

void write_ablation_csv(const fs::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "L_ins,L_clu,L_spc,acc_clu,acc_clu_std,nmi,nmi_std,ari,ari_std,acc_cls,acc_cls_std,f_score,f_score_std\n";
  for (const auto& r : rows) {
    out << r.ins << ',' << r.clu << ',' << r.spc;
    for (const char* k : {"acc_clu", "nmi", "ari", "acc_cls", "f_score"}) {
      const auto& s = r.report.summary.at(k);
      out << ',' << s.mean << ',' << s.std;
    }
    out << '\n';
  }
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda_dis") return SweepParam::kLambdaDis;
  if (name == "d_z" || name == "latent_dim") return SweepParam::kLatentDim;
  if (name == "batch") return SweepParam::kBatch;
  if (name == "epochs") return SweepParam::kEpochs;
  throw std::invalid_argument("unknown sweep parameter '" + name + "' (lambda_dis, d_z, batch, epochs)");
}

std::string to_string(SweepParam param) {
  switch (param) {
    case SweepParam::kLambdaDis:
      return "lambda_dis";
    case SweepParam::kLatentDim:
      return "d_z";
    case SweepParam::kBatch:
      return "batch";
    case SweepParam::kEpochs:
      return "epochs";
  }
  return "?";
}

RunConfig with_param(const RunConfig& config, SweepParam param, double value) {
  RunConfig c = config;
  auto positive_int = [&](const char* what) {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw std::invalid_argument(std::string(what) + " must be a positive integer");
    }
    return static_cast<std::size_t>(value);
  };
  switch (param) {
    case SweepParam::kLambdaDis:
      c.stage2.lambda_dis = value;
      break;
    case SweepParam::kLatentDim:
      c.stage2.latent_dim = positive_int("d_z");
      break;
    case SweepParam::kBatch:
      c.stage2.batch_size = positive_int("batch");
      break;
    case SweepParam::kEpochs:
      c.stage2.epochs = static_cast<int>(positive_int("epochs"));
      break;
  }
  c.validate();
  return c;
}

std::vector<SweepPoint> run_sweep(const RunConfig& config, SweepParam param, const std::vector<double>& grid,
                                  const RunOptions& options) {
  if (grid.empty()) throw std::invalid_argument("run_sweep: empty grid");
  std::vector<SweepPoint> points;
  for (double value : grid) {
    std::ostringstream line;
    line << "sweep " << to_string(param) << " = " << value;
    say(options, line.str());
    points.push_back({value, run_pipeline(with_param(config, param, value), options)});
  }
  return points;
}

void write_sweep_csv(const fs::path& path, SweepParam param, const std::vector<SweepPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << to_string(param) << ",acc_clu,acc_clu_std,nmi,ari\n";
  for (const auto& p : points) {
    const auto& s = p.report.summary;
    out << p.value << ',' << s.at("acc_clu").mean << ',' << s.at("acc_clu").std << ',' << s.at("nmi").mean << ','
        << s.at("ari").mean << '\n';
  }
}

double sweep_argmax(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw std::invalid_argument("sweep_argmax: no points");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].report.summary.at("acc_clu").mean > points[best].report.summary.at("acc_clu").mean) best = i;
  }
  return points[best].value;
}

}  // namespace mvd::pipeline
