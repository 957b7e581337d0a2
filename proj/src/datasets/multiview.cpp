#include "mvd/datasets/multiview.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mvd::datasets {

void MultiViewBatch::validate() const {
  if (views.size() < 2) throw std::invalid_argument("MultiViewBatch: at least two views required");
  const auto n = views.front().rows();
  for (const auto& v : views) {
    if (v.rows() != n) throw std::invalid_argument("MultiViewBatch: views disagree on instance count");
  }
  if (labels && static_cast<Eigen::Index>(labels->size()) != n) {
    throw std::invalid_argument("MultiViewBatch: label count does not match instance count");
  }
  if (gt_specific) {
    if (gt_specific->size() != views.size()) {
      throw std::invalid_argument("MultiViewBatch: one specific-factor block per view required");
    }
    for (const auto& p : *gt_specific) {
      if (p.rows() != n) throw std::invalid_argument("MultiViewBatch: specific factors misaligned");
    }
  }
  if (gt_consistent && gt_consistent->rows() != n) {
    throw std::invalid_argument("MultiViewBatch: consistent factors misaligned");
  }
  if (!ids.empty() && static_cast<Eigen::Index>(ids.size()) != n) {
    throw std::invalid_argument("MultiViewBatch: id count does not match instance count");
  }
}

MultiViewBatch MultiViewBatch::select(std::span<const std::size_t> rows) const {
  const auto n = size();
  for (auto r : rows) {
    if (r >= n) throw std::out_of_range("MultiViewBatch::select: row " + std::to_string(r) + " out of range");
  }
  auto gather = [&](const Matrix& m) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
  };
  MultiViewBatch out;
  for (const auto& v : views) out.views.push_back(gather(v));
  if (labels) {
    std::vector<int> l;
    l.reserve(rows.size());
    for (auto r : rows) l.push_back((*labels)[r]);
    out.labels = std::move(l);
  }
  if (gt_specific) {
    std::vector<Matrix> p;
    for (const auto& m : *gt_specific) p.push_back(gather(m));
    out.gt_specific = std::move(p);
  }
  if (gt_consistent) out.gt_consistent = gather(*gt_consistent);
  if (!ids.empty()) {
    for (auto r : rows) out.ids.push_back(ids[r]);
  }
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  if (batch == 0) throw std::invalid_argument("minibatches: batch size must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    if (end - start < 2) break;
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace mvd::datasets
