// mvd: command-line front end for training, ablations, sweeps and evaluation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvd/datasets/dataset_io.hpp"
#include "mvd/evaluate/kmeans.hpp"
#include "mvd/evaluate/pca.hpp"
#include "mvd/evaluate/probe.hpp"
#include "mvd/ndgrad/allocator.hpp"
#include "mvd/pipeline/run.hpp"

namespace fs = std::filesystem;
namespace pl = mvd::pipeline;
using nlohmann::json;

namespace {

pl::RunConfig config_for(const std::string& path, const std::vector<std::uint64_t>& seeds) {
  pl::RunConfig c = path.empty() ? pl::RunConfig{} : pl::load_config(path);
  if (!seeds.empty()) c.seeds = seeds;
  c.validate();
  return c;
}

void print_summary(const pl::RunReport& r) {
  std::cout << "config " << r.config_hash << '\n';
  for (const auto& [k, s] : r.summary) {
    std::cout << "  " << std::left << std::setw(14) << k << std::fixed << std::setprecision(4) << s.mean << " +- "
              << s.std << '\n';
  }
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  mvd::ndgrad::tune_allocator();
  CLI::App app{"Two-stage multi-view representation learning with consistent/specific disentanglement"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_root = "runs";
  std::vector<std::uint64_t> seeds;
  bool quiet = false;
  bool fresh = false;
  auto common = [&](CLI::App* cmd, bool need_config) {
    auto* c = cmd->add_option("--config", config_path, "Run configuration (JSON)");
    if (need_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_root, "Output root for runs and caches")->required();
    cmd->add_flag("--quiet", quiet, "No progress lines");
    cmd->add_flag("--fresh", fresh, "Ignore cached stage-1 and stage-2 checkpoints");
  };
  auto options = [&] {
    pl::RunOptions o;
    o.out_root = out_root;
    o.log = quiet ? nullptr : &std::cerr;
    o.reuse_stage1 = !fresh;
    o.resume = !fresh;
    return o;
  };

  auto* run = app.add_subcommand("run", "Train and evaluate one or more seeds");
  common(run, true);
  run->add_option("--seed", seeds, "Seed(s); overrides the config's list")->required();

  auto* ablate = app.add_subcommand("ablate", "Component table: every trainable on/off combination");
  common(ablate, true);
  ablate->add_option("--seed", seeds, "Seed(s); overrides the config's list");

  std::string param;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Vary one hyperparameter over a grid");
  common(sweep, true);
  sweep->add_option("--seed", seeds, "Seed(s); overrides the config's list");
  sweep->add_option("--param", param, "lambda_dis | d_z | batch | epochs")->required();
  sweep->add_option("--values", values, "Comma-separated grid, e.g. 0,0.01,0.02,0.05,0.1")->required();

  std::string repr_path;
  int restarts = 10;
  double train_fraction = 0.8;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Metrics of a stored representation file");
  eval->add_option("--representation", repr_path, "representation.jsonl of a run")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", eval_seed, "Seed for k-means and the probe split");
  eval->add_option("--restarts", restarts, "k-means restarts");
  eval->add_option("--train-fraction", train_fraction, "Probe training share");

  std::uint64_t seed = 0;
  std::size_t view = 0;
  int class_id = 0;
  std::size_t count = 16;
  std::string output;
  auto* generate = app.add_subcommand("generate", "Sample view data for a class from a finished run");
  common(generate, true);
  generate->add_option("--seed", seed, "Seed of the finished run")->required();
  generate->add_option("--view", view, "View to generate");
  generate->add_option("--class", class_id, "Cluster index to condition on")->required();
  generate->add_option("--count", count, "Number of samples");
  generate->add_option("--output", output, "Dataset file to write")->required();

  auto* project = app.add_subcommand("project", "Two-component PCA of a representation file, as CSV");
  project->add_option("--representation", repr_path, "representation.jsonl of a run")->required()->check(CLI::ExistingFile);
  project->add_option("--output", output, "CSV to write")->required();

  std::string preset = "synthetic";
  std::string mnist_dir;
  auto* init = app.add_subcommand("init-config", "Write a full default configuration");
  init->add_option("--preset", preset, "synthetic | edge-mnist")->check(CLI::IsMember({"synthetic", "edge-mnist"}));
  init->add_option("--mnist-dir", mnist_dir, "Directory of the MNIST IDX files (edge-mnist)");
  init->add_option("--output", output, "File to write (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto report = pl::run_pipeline(config_for(config_path, seeds), options());
      print_summary(report);
      std::cout << "results in " << (fs::path(out_root) / report.config_hash).string() << '\n';
    } else if (*ablate) {
      const auto rows = pl::run_ablation(config_for(config_path, seeds), options());
      const fs::path csv = fs::path(out_root) / "ablation.csv";
      pl::write_ablation_csv(csv, rows);
      std::cout << "L_ins L_clu L_spc   acc_clu   nmi      ari\n";
      for (const auto& r : rows) {
        const auto& s = r.report.summary;
        std::cout << "  " << r.ins << "     " << r.clu << "     " << r.spc << "    " << std::fixed << std::setprecision(4)
                  << s.at("acc_clu").mean << "  " << s.at("nmi").mean << "  " << s.at("ari").mean << '\n';
      }
      std::cout << "wrote " << csv.string() << '\n';
    } else if (*sweep) {
      const auto p = pl::parse_sweep_param(param);
      const auto points = pl::run_sweep(config_for(config_path, seeds), p, parse_values(values), options());
      const fs::path csv = fs::path(out_root) / ("sweep_" + pl::to_string(p) + ".csv");
      pl::write_sweep_csv(csv, p, points);
      for (const auto& pt : points) {
        std::cout << std::defaultfloat << pl::to_string(p) << '=' << pt.value << "  acc_clu " << std::fixed << std::setprecision(4)
                  << pt.report.summary.at("acc_clu").mean << " +- " << pt.report.summary.at("acc_clu").std << '\n';
      }
      std::cout << std::defaultfloat << "best " << pl::to_string(p) << " = " << pl::sweep_argmax(points) << "\nwrote " << csv.string() << '\n';
    } else if (*eval) {
      const auto loaded = mvd::datasets::load_dataset(repr_path);
      if (!loaded.batch.labels) throw std::runtime_error(repr_path + ": no labels");
      const auto& x = loaded.batch.views.front();
      const auto& y = *loaded.batch.labels;
      const auto km = mvd::evaluate::kmeans(x, loaded.header.num_classes, eval_seed, {restarts});
      const auto probe = mvd::evaluate::linear_probe_split(x, y, eval_seed, train_fraction);
      json j = {{"acc_clu", mvd::evaluate::hungarian_acc(km.labels, y)},
                {"nmi", mvd::evaluate::nmi(km.labels, y)},
                {"ari", mvd::evaluate::ari(km.labels, y)},
                {"acc_cls", probe.accuracy},
                {"f_score", probe.macro_f1}};
      std::cout << j.dump(2) << '\n';
    } else if (*generate) {
      const auto config = config_for(config_path, {seed});
      const auto data = pl::load_run_dataset(config);
      auto o = options();
      o.reuse_stage1 = true;
      const auto model = pl::trained_model(config, data, seed, o);
      mvd::ndgrad::Rng rng(seed);
      mvd::datasets::MultiViewBatch batch;
      batch.views = {mvd::disentangle::conditional_sample(model, view, class_id, std::nullopt, count, rng)};
      batch.labels = std::vector<int>(count, class_id);
      for (std::size_t i = 0; i < count; ++i) batch.ids.push_back(static_cast<std::int64_t>(i));
      mvd::datasets::save_dataset(output, batch, {config.stage1.num_clusters, seed});
      std::cout << "wrote " << count << " samples of view " << view << " to " << output << '\n';
    } else if (*project) {
      const auto loaded = mvd::datasets::load_dataset(repr_path);
      const auto proj = mvd::evaluate::pca_project(loaded.batch.views.front());
      std::ofstream out(output);
      if (!out) throw std::runtime_error("cannot write " + output);
      out.precision(17);
      out << "id,label,pc1,pc2\n";
      for (Eigen::Index i = 0; i < proj.coords.rows(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        out << (u < loaded.batch.ids.size() ? loaded.batch.ids[u] : i) << ','
            << (loaded.batch.labels ? (*loaded.batch.labels)[u] : -1) << ',' << proj.coords(i, 0) << ','
            << proj.coords(i, 1) << '\n';
      }
      std::cout << "explained variance " << proj.explained_ratio[0] << ' ' << proj.explained_ratio[1] << "\nwrote "
                << output << '\n';
    } else if (*init) {
      const auto config = preset == "edge-mnist" ? pl::edge_mnist_defaults(mnist_dir) : pl::RunConfig{};
      if (output.empty()) {
        std::cout << pl::to_json(config).dump(2) << '\n';
      } else {
        pl::save_config(output, config);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "mvd: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
