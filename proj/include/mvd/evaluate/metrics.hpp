#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvd::evaluate {

/// Counts of (predicted cluster, true class) pairs over compacted label ids.
struct ContingencyTable {
  Eigen::MatrixXd counts;  // pred x true
  std::size_t total = 0;
};

/// Throws std::invalid_argument on length mismatch or empty input.
ContingencyTable contingency(std::span<const int> pred, std::span<const int> truth);

/// Fraction of instances matched under the best one-to-one cluster-to-class map.
double hungarian_acc(std::span<const int> pred, std::span<const int> truth);

/// I(pred; truth) / sqrt(H(pred) H(truth)); 1 for identical partitions, 0 when
/// exactly one side has zero entropy.
double nmi(std::span<const int> pred, std::span<const int> truth);

/// Pair-counting adjusted Rand index; 1 when the denominator vanishes.
double ari(std::span<const int> pred, std::span<const int> truth);

/// Minimum-cost perfect assignment on a square or wide cost matrix (rows <= cols).
/// Returns the column assigned to each row.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

struct MetricsRecord {
  double acc_clu = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double acc_cls = 0.0;
  double f_score = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_seconds = 0.0;

  /// Throws std::domain_error when a metric leaves its range.
  void validate() const;
};

}  // namespace mvd::evaluate
