#include "mvd/evaluate/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace mvd::evaluate {

namespace {

using Index = Eigen::Index;

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

struct Objective {
  const Matrix& x;  // with bias column
  const Matrix& onehot;
  double l2;

  double value_and_grad(const Matrix& w, Matrix& grad) const {
    const double n = static_cast<double>(x.rows());
    Matrix logits = x * w;
    Eigen::VectorXd mx = logits.rowwise().maxCoeff();
    Matrix shifted = logits.colwise() - mx;
    Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
    const double ce = (lse.sum() - shifted.cwiseProduct(onehot).sum()) / n;
    Matrix p = (shifted.colwise() - lse).array().exp().matrix();
    grad = x.transpose() * (p - onehot) / n;
    Matrix wreg = w;
    wreg.row(w.rows() - 1).setZero();
    grad += l2 * wreg;
    return ce + 0.5 * l2 * wreg.squaredNorm();
  }
};

double largest_eigenvalue(const Matrix& gram) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(gram.rows()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / norm;
  }
  return std::max(lambda, (gram * v).norm());
}

}  // namespace

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
  return out;
}

Split stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: train fraction must lie in (0,1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.size() < 2) throw StratificationError("stratified_split: at least two classes required");
  std::mt19937_64 rng(seed);
  Split split;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size());
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<long>(n_train));
    split.test.insert(split.test.end(), members.begin() + static_cast<long>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double macro_f1(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("macro_f1: bad label lengths");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0.0;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c;
      const bool t = truth[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const double denom = 2 * tp + fp + fn;
    total += denom > 0 ? 2 * tp / denom : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

ProbeResult linear_probe(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                         std::span<const int> test_y, const ProbeOptions& options) {
  if (train_x.rows() != static_cast<Index>(train_y.size()) || test_x.rows() != static_cast<Index>(test_y.size())) {
    throw std::invalid_argument("linear_probe: feature/label length mismatch");
  }
  if (train_x.cols() != test_x.cols()) throw std::invalid_argument("linear_probe: feature width mismatch");
  std::map<int, int> class_index;
  for (int y : train_y) class_index.emplace(y, 0);
  if (class_index.size() < 2) throw StratificationError("linear_probe: training split has a single class");
  std::vector<int> class_of;
  for (auto& [label, idx] : class_index) {
    idx = static_cast<int>(class_of.size());
    class_of.push_back(label);
  }
  for (int y : test_y) {
    if (!class_index.count(y)) throw StratificationError("linear_probe: test class missing from training split");
  }

  const Index d = train_x.cols();
  const auto n_classes = static_cast<Index>(class_of.size());
  Eigen::RowVectorXd mu = train_x.colwise().mean();
  Eigen::RowVectorXd sd = ((train_x.rowwise() - mu).array().square().colwise().mean()).sqrt().matrix();
  for (Index j = 0; j < d; ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  auto prepare = [&](const Matrix& x) {
    Matrix out(x.rows(), d + 1);
    out.leftCols(d) = ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();
    out.col(d).setOnes();
    return out;
  };
  Matrix xtr = prepare(train_x);
  Matrix onehot = Matrix::Zero(xtr.rows(), n_classes);
  for (std::size_t i = 0; i < train_y.size(); ++i) onehot(static_cast<Index>(i), class_index[train_y[i]]) = 1.0;

  Objective obj{xtr, onehot, options.l2};
  const double lipschitz =
      0.5 * largest_eigenvalue(xtr.transpose() * xtr / static_cast<double>(xtr.rows())) + options.l2;
  const double step = 1.0 / lipschitz;

  Matrix w = Matrix::Zero(d + 1, n_classes);
  Matrix y = w;
  Matrix grad;
  double t = 1.0;
  double last = obj.value_and_grad(w, grad);
  for (int it = 0; it < options.max_iterations; ++it) {
    obj.value_and_grad(y, grad);
    Matrix w_next = y - step * grad;
    Matrix g_next;
    const double value = obj.value_and_grad(w_next, g_next);
    if (value > last) {
      // Momentum restart.
      t = 1.0;
      y = w;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = w_next + ((t - 1.0) / t_next) * (w_next - w);
    w = std::move(w_next);
    t = t_next;
    last = value;
    if (g_next.norm() < options.gradient_tolerance) break;
  }

  Matrix probs = softmax_rows(prepare(test_x) * w);
  std::vector<int> pred(test_y.size());
  std::size_t correct = 0;
  for (Index i = 0; i < probs.rows(); ++i) {
    Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    pred[static_cast<std::size_t>(i)] = class_of[static_cast<std::size_t>(arg)];
    correct += pred[static_cast<std::size_t>(i)] == test_y[static_cast<std::size_t>(i)];
  }
  ProbeResult result;
  result.accuracy = test_y.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_y.size());
  result.macro_f1 = test_y.empty() ? 0.0 : macro_f1(pred, test_y);
  return result;
}

ProbeResult linear_probe_split(const Matrix& x, std::span<const int> labels, std::uint64_t seed,
                               double train_fraction, const ProbeOptions& options) {
  auto split = stratified_split(labels, train_fraction, seed);
  std::vector<int> ytr, yte;
  for (auto i : split.train) ytr.push_back(labels[i]);
  for (auto i : split.test) yte.push_back(labels[i]);
  return linear_probe(gather_rows(x, split.train), ytr, gather_rows(x, split.test), yte, options);
}

double linear_regression_r2(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.rows() < 2) throw std::invalid_argument("linear_regression_r2: bad shapes");
  Matrix design(x.rows(), x.cols() + 1);
  design.leftCols(x.cols()) = x;
  design.col(x.cols()).setOnes();
  Matrix coef = design.colPivHouseholderQr().solve(y);
  Matrix resid = y - design * coef;
  double total = 0.0;
  for (Index j = 0; j < y.cols(); ++j) {
    const double ss_tot = (y.col(j).array() - y.col(j).mean()).square().sum();
    const double ss_res = resid.col(j).squaredNorm();
    total += ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
  }
  return total / static_cast<double>(y.cols());
}

}  // namespace mvd::evaluate
