#include "mvd/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace mvd::pipeline {

using nlohmann::json;

namespace {

// Reads members of one object, remembering which keys were used.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string kind_name(DatasetKind kind) { return kind == DatasetKind::kSynthetic ? "synthetic" : "edge-mnist"; }

DatasetKind parse_kind(const std::string& name) {
  if (name == "synthetic") return DatasetKind::kSynthetic;
  if (name == "edge-mnist") return DatasetKind::kEdgeMnist;
  throw ConfigError("dataset.kind: expected 'synthetic' or 'edge-mnist', got '" + name + "'");
}

json synthetic_json(const datasets::SyntheticSpec& s) {
  return {{"num_classes", s.num_classes},
          {"num_views", s.num_views},
          {"consistent_dim", s.consistent_dim},
          {"specific_dim", s.specific_dim},
          {"view_dim", s.view_dim},
          {"num_instances", s.num_instances},
          {"noise_std", s.noise_std},
          {"seed", s.seed},
          {"class_scale", s.class_scale},
          {"specific_scale", s.specific_scale},
          {"specific_component_std", s.specific_component_std},
          {"standardize", s.standardize}};
}

void read_synthetic(const json& j, datasets::SyntheticSpec& s) {
  Reader r(j, "dataset.synthetic");
  r.get("num_classes", s.num_classes);
  r.get("num_views", s.num_views);
  r.get("consistent_dim", s.consistent_dim);
  r.get("specific_dim", s.specific_dim);
  r.get("view_dim", s.view_dim);
  r.get("num_instances", s.num_instances);
  r.get("noise_std", s.noise_std);
  r.get("seed", s.seed);
  r.get("class_scale", s.class_scale);
  r.get("specific_scale", s.specific_scale);
  r.get("specific_component_std", s.specific_component_std);
  r.get("standardize", s.standardize);
  r.finish();
}

json augmentation_json(const datasets::AugmentationPolicy& a) {
  return {{"gaussian_noise_std", a.gaussian_noise_std},
          {"feature_dropout_prob", a.feature_dropout_prob},
          {"scale_jitter_lo", a.scale_jitter_lo},
          {"scale_jitter_hi", a.scale_jitter_hi},
          {"image_height", a.image_height},
          {"image_width", a.image_width},
          {"occlusion_prob", a.occlusion_prob},
          {"occlusion_max_fraction", a.occlusion_max_fraction}};
}

void read_augmentation(const json& j, datasets::AugmentationPolicy& a) {
  Reader r(j, "stage1.augmentation");
  r.get("gaussian_noise_std", a.gaussian_noise_std);
  r.get("feature_dropout_prob", a.feature_dropout_prob);
  r.get("scale_jitter_lo", a.scale_jitter_lo);
  r.get("scale_jitter_hi", a.scale_jitter_hi);
  r.get("image_height", a.image_height);
  r.get("image_width", a.image_width);
  r.get("occlusion_prob", a.occlusion_prob);
  r.get("occlusion_max_fraction", a.occlusion_max_fraction);
  r.finish();
}

json stage1_json(const consistency::Stage1Config& c) {
  return {{"hidden", c.hidden},
          {"embed_dim", c.embed_dim},
          {"proj_dim", c.proj_dim},
          {"num_clusters", c.num_clusters},
          {"tau", c.tau},
          {"lambda_clu", c.lambda_clu},
          {"epochs_pretrain", c.epochs_pretrain},
          {"epochs_cluster", c.epochs_cluster},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"use_knn", c.use_knn},
          {"knn_k", c.knn_k},
          {"enable_ins", c.enable_ins},
          {"enable_clu", c.enable_clu},
          {"augmentation", augmentation_json(c.augmentation)}};
}

void read_stage1(const json& j, consistency::Stage1Config& c) {
  Reader r(j, "stage1");
  r.get("hidden", c.hidden);
  r.get("embed_dim", c.embed_dim);
  r.get("proj_dim", c.proj_dim);
  r.get("num_clusters", c.num_clusters);
  r.get("tau", c.tau);
  r.get("lambda_clu", c.lambda_clu);
  r.get("epochs_pretrain", c.epochs_pretrain);
  r.get("epochs_cluster", c.epochs_cluster);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("use_knn", c.use_knn);
  r.get("knn_k", c.knn_k);
  r.get("enable_ins", c.enable_ins);
  r.get("enable_clu", c.enable_clu);
  if (const json* a = r.child("augmentation")) read_augmentation(*a, c.augmentation);
  r.finish();
}

json stage2_json(const RunConfig& rc) {
  const auto& c = rc.stage2;
  return {{"enable_spc", rc.enable_spc},
          {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"q_hidden", c.q_hidden},
          {"lambda_dis", c.lambda_dis},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"variational_lr", c.variational_lr},
          {"inner_steps", c.inner_steps},
          {"batch_size", c.batch_size},
          {"cond_mode", disentangle::to_string(c.cond_mode)},
          {"mixture_components", c.mixture_components},
          {"view_noise", c.view_noise}};
}

void read_stage2(const json& j, RunConfig& rc) {
  auto& c = rc.stage2;
  Reader r(j, "stage2");
  r.get("enable_spc", rc.enable_spc);
  r.get("latent_dim", c.latent_dim);
  r.get("hidden", c.hidden);
  r.get("q_hidden", c.q_hidden);
  r.get("lambda_dis", c.lambda_dis);
  r.get("epochs", c.epochs);
  r.get("lr", c.lr);
  r.get("variational_lr", c.variational_lr);
  r.get("inner_steps", c.inner_steps);
  r.get("batch_size", c.batch_size);
  std::string mode = disentangle::to_string(c.cond_mode);
  r.get("cond_mode", mode);
  try {
    c.cond_mode = disentangle::parse_cond_mode(mode);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("stage2.cond_mode: ") + e.what());
  }
  r.get("mixture_components", c.mixture_components);
  r.get("view_noise", c.view_noise);
  r.finish();
}

json dataset_json(const DatasetConfig& d) {
  return {{"kind", kind_name(d.kind)},
          {"synthetic", synthetic_json(d.synthetic)},
          {"mnist_dir", d.mnist_dir},
          {"subset", d.subset},
          {"subset_seed", d.subset_seed}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  try {
    if (dataset.kind == DatasetKind::kSynthetic) {
      dataset.synthetic.validate();
      if (dataset.synthetic.num_classes != stage1.num_clusters) {
        throw ConfigError("stage1.num_clusters must equal dataset.synthetic.num_classes");
      }
    } else if (dataset.mnist_dir.empty()) {
      throw ConfigError("dataset.mnist_dir is required for edge-mnist");
    }
    stage1.validate();
    stage2.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!stage1.enable_ins && !stage1.enable_clu && !enable_spc) {
    throw ConfigError("all objectives disabled: nothing to train");
  }
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (!(eval.probe_train_fraction > 0.0 && eval.probe_train_fraction < 1.0)) {
    throw ConfigError("eval.probe_train_fraction must lie in (0, 1)");
  }
  if (eval.kmeans_restarts < 1) throw ConfigError("eval.kmeans_restarts must be positive");
}

RunConfig RunConfig::for_seed(std::uint64_t seed) const {
  RunConfig out = *this;
  out.stage1.seed = seed;
  out.stage2.seed = seed;
  return out;
}

RunConfig edge_mnist_defaults(const std::string& mnist_dir) {
  RunConfig c;
  c.dataset.kind = DatasetKind::kEdgeMnist;
  c.dataset.mnist_dir = mnist_dir;
  c.stage1.num_clusters = 10;
  c.stage1.augmentation = {0.05, 0.0, 0.9, 1.1, 28, 28, 0.5, 0.3};
  c.stage2.hidden = {512, 256};
  c.stage2.latent_dim = 10;
  return c;
}

json to_json(const RunConfig& config) {
  return {{"dataset", dataset_json(config.dataset)},
          {"stage1", stage1_json(config.stage1)},
          {"stage2", stage2_json(config)},
          {"eval", {{"probe_train_fraction", config.eval.probe_train_fraction},
                    {"kmeans_restarts", config.eval.kmeans_restarts}}},
          {"seeds", config.seeds}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "config");
  if (const json* d = r.child("dataset")) {
    Reader rd(*d, "dataset");
    std::string kind = kind_name(c.dataset.kind);
    rd.get("kind", kind);
    c.dataset.kind = parse_kind(kind);
    if (c.dataset.kind == DatasetKind::kEdgeMnist) {
      std::string dir = c.dataset.mnist_dir;
      rd.get("mnist_dir", dir);
      const RunConfig base = edge_mnist_defaults(dir);
      c.dataset = base.dataset;
      c.stage1 = base.stage1;
      c.stage2 = base.stage2;
    }
    if (const json* s = rd.child("synthetic")) read_synthetic(*s, c.dataset.synthetic);
    rd.get("mnist_dir", c.dataset.mnist_dir);
    rd.get("subset", c.dataset.subset);
    rd.get("subset_seed", c.dataset.subset_seed);
    rd.finish();
  }
  if (const json* s = r.child("stage1")) read_stage1(*s, c.stage1);
  if (const json* s = r.child("stage2")) read_stage2(*s, c);
  if (const json* e = r.child("eval")) {
    Reader re(*e, "eval");
    re.get("probe_train_fraction", c.eval.probe_train_fraction);
    re.get("kmeans_restarts", c.eval.kmeans_restarts);
    re.finish();
  }
  r.get("seeds", c.seeds);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  json j = to_json(config);
  j.erase("seeds");
  return hex64(fnv1a64(j.dump()));
}

std::string stage1_hash(const RunConfig& config) {
  json j = to_json(config);
  return hex64(fnv1a64(json{{"dataset", j["dataset"]}, {"stage1", j["stage1"]}}.dump()));
}

}  // namespace mvd::pipeline
