#include "mvd/evaluate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace mvd::evaluate {

namespace {

std::vector<int> compact(std::span<const int> labels, int& count) {
  std::map<int, int> ids;
  for (int l : labels) ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : ids) id = next++;
  count = next;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  return out;
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

double entropy(const Eigen::VectorXd& counts, double total) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0) {
      const double p = counts(i) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("contingency: label lengths differ");
  if (pred.empty()) throw std::invalid_argument("contingency: empty labelings");
  int np = 0;
  int nt = 0;
  auto p = compact(pred, np);
  auto t = compact(truth, nt);
  ContingencyTable table{Eigen::MatrixXd::Zero(np, nt), pred.size()};
  for (std::size_t i = 0; i < p.size(); ++i) table.counts(p[i], t[i]) += 1.0;
  return table;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path with potentials, O(n^2 m).
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n > m) throw std::invalid_argument("solve_assignment: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

double hungarian_acc(std::span<const int> pred, std::span<const int> truth) {
  auto table = contingency(pred, truth);
  const auto k = std::max(table.counts.rows(), table.counts.cols());
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(k, k);
  cost.topLeftCorner(table.counts.rows(), table.counts.cols()) = -table.counts;
  auto assignment = solve_assignment(cost);
  double matched = 0.0;
  for (Eigen::Index r = 0; r < k; ++r) matched -= cost(r, assignment[static_cast<std::size_t>(r)]);
  return matched / static_cast<double>(table.total);
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  auto table = contingency(pred, truth);
  const double n = static_cast<double>(table.total);
  Eigen::VectorXd a = table.counts.rowwise().sum();
  Eigen::VectorXd b = table.counts.colwise().sum().transpose();
  const double ha = entropy(a, n);
  const double hb = entropy(b, n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < table.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.counts.cols(); ++j) {
      const double nij = table.counts(i, j);
      if (nij > 0) mi += nij / n * std::log(nij * n / (a(i) * b(j)));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  auto table = contingency(pred, truth);
  const double n = static_cast<double>(table.total);
  double index = 0.0;
  for (Eigen::Index i = 0; i < table.counts.size(); ++i) index += choose2(table.counts.data()[i]);
  double sum_a = 0.0;
  double sum_b = 0.0;
  Eigen::VectorXd a = table.counts.rowwise().sum();
  Eigen::VectorXd b = table.counts.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < a.size(); ++i) sum_a += choose2(a(i));
  for (Eigen::Index j = 0; j < b.size(); ++j) sum_b += choose2(b(j));
  const double total_pairs = choose2(n);
  const double expected = total_pairs > 0 ? sum_a * sum_b / total_pairs : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

void MetricsRecord::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(acc_clu) || !in01(nmi) || !in01(acc_cls) || !in01(f_score) || !(ari >= -1.0 && ari <= 1.0)) {
    throw std::domain_error("MetricsRecord: metric outside its valid range");
  }
}

}  // namespace mvd::evaluate
