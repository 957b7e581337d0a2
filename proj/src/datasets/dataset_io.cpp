#include "mvd/datasets/dataset_io.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

namespace mvd::datasets {

namespace {

constexpr const char* kFormat = "mvd-multiview";
constexpr int kVersion = 1;

nlohmann::json row_json(const Matrix& m, Eigen::Index r) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const MultiViewBatch& batch, const DatasetHeader& header) {
  if (batch.views.empty()) throw std::invalid_argument("save_dataset: no views");
  std::ofstream out(path);
  if (!out) throw DatasetFormatError("cannot write dataset file " + path.string());
  const auto n = static_cast<Eigen::Index>(batch.size());

  nlohmann::json head;
  head["format"] = kFormat;
  head["version"] = kVersion;
  head["C"] = header.num_classes;
  head["V"] = batch.num_views();
  head["N"] = n;
  head["seed"] = header.seed;
  head["dims"] = nlohmann::json::array();
  for (const auto& v : batch.views) head["dims"].push_back(v.cols());
  head["specific_dims"] = nlohmann::json::array();
  if (batch.gt_specific) {
    for (const auto& p : *batch.gt_specific) head["specific_dims"].push_back(p.cols());
  }
  head["consistent_dim"] = batch.gt_consistent ? batch.gt_consistent->cols() : 0;
  head["has_labels"] = batch.labels.has_value();
  out << head.dump() << '\n';

  for (Eigen::Index k = 0; k < n; ++k) {
    nlohmann::json row;
    row["id"] = batch.ids.empty() ? static_cast<std::int64_t>(k) : batch.ids[static_cast<std::size_t>(k)];
    if (batch.labels) row["label"] = (*batch.labels)[static_cast<std::size_t>(k)];
    row["views"] = nlohmann::json::array();
    for (const auto& v : batch.views) row["views"].push_back(row_json(v, k));
    if (batch.gt_specific) {
      row["specific"] = nlohmann::json::array();
      for (const auto& p : *batch.gt_specific) row["specific"].push_back(row_json(p, k));
    }
    if (batch.gt_consistent) row["consistent"] = row_json(*batch.gt_consistent, k);
    out << row.dump() << '\n';
  }
  if (!out) throw DatasetFormatError("write failed for " + path.string());
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetFormatError("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DatasetFormatError("empty dataset file " + path.string());

  LoadedDataset result;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> specific_dims;
  Eigen::Index n = 0;
  bool has_labels = false;
  std::size_t consistent_dim = 0;
  try {
    auto head = nlohmann::json::parse(line);
    if (head.at("format") != kFormat) throw DatasetFormatError("not an mvd dataset file: " + path.string());
    if (head.at("version") != kVersion) throw DatasetFormatError("unsupported dataset version in " + path.string());
    result.header.num_classes = head.at("C").get<int>();
    result.header.seed = head.at("seed").get<std::uint64_t>();
    n = head.at("N").get<Eigen::Index>();
    dims = head.at("dims").get<std::vector<std::size_t>>();
    specific_dims = head.at("specific_dims").get<std::vector<std::size_t>>();
    has_labels = head.at("has_labels").get<bool>();
    consistent_dim = head.value("consistent_dim", std::size_t{0});
    if (head.at("V").get<std::size_t>() != dims.size()) throw DatasetFormatError("header V disagrees with dims");
  } catch (const nlohmann::json::exception& e) {
    throw DatasetFormatError(std::string("malformed dataset header: ") + e.what());
  }

  auto& batch = result.batch;
  for (auto d : dims) batch.views.emplace_back(n, static_cast<Eigen::Index>(d));
  std::vector<Matrix> specific;
  for (auto d : specific_dims) specific.emplace_back(n, static_cast<Eigen::Index>(d));
  std::vector<int> labels;
  Matrix consistent(consistent_dim > 0 ? n : 0, static_cast<Eigen::Index>(consistent_dim));

  for (Eigen::Index k = 0; k < n; ++k) {
    if (!std::getline(in, line)) throw DatasetFormatError("dataset file truncated: " + path.string());
    try {
      auto row = nlohmann::json::parse(line);
      batch.ids.push_back(row.at("id").get<std::int64_t>());
      if (has_labels) labels.push_back(row.at("label").get<int>());
      const auto& views = row.at("views");
      if (views.size() != dims.size()) throw DatasetFormatError("row view count mismatch");
      for (std::size_t v = 0; v < dims.size(); ++v) {
        if (views[v].size() != dims[v]) throw DatasetFormatError("row width mismatch");
        for (std::size_t c = 0; c < dims[v]; ++c) batch.views[v](k, static_cast<Eigen::Index>(c)) = views[v][c].get<double>();
      }
      if (!specific_dims.empty()) {
        const auto& sp = row.at("specific");
        for (std::size_t v = 0; v < specific_dims.size(); ++v) {
          if (sp[v].size() != specific_dims[v]) throw DatasetFormatError("specific width mismatch");
          for (std::size_t c = 0; c < specific_dims[v]; ++c) specific[v](k, static_cast<Eigen::Index>(c)) = sp[v][c].get<double>();
        }
      }
      if (consistent_dim > 0) {
        const auto& cs = row.at("consistent");
        if (cs.size() != consistent_dim) throw DatasetFormatError("consistent width mismatch");
        for (std::size_t c = 0; c < consistent_dim; ++c) consistent(k, static_cast<Eigen::Index>(c)) = cs[c].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DatasetFormatError(std::string("malformed dataset row: ") + e.what());
    }
  }
  if (has_labels) batch.labels = std::move(labels);
  if (!specific.empty()) batch.gt_specific = std::move(specific);
  if (consistent_dim > 0) batch.gt_consistent = std::move(consistent);
  return result;
}

}  // namespace mvd::datasets
