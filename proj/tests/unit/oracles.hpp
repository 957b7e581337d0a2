#pragma once

// Independent brute-force references for clustering metrics. Test-only.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace oracle {

inline std::vector<int> unique_sorted(const std::vector<int>& v) {
  std::set<int> s(v.begin(), v.end());
  return {s.begin(), s.end()};
}

/// Best matched count over every injective map from clusters to classes
/// (padded with dummy classes), divided by N.
inline double brute_force_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
  auto clusters = unique_sorted(pred);
  auto classes = unique_sorted(truth);
  const std::size_t k = std::max(clusters.size(), classes.size());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  long best = 0;
  do {
    long matched = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto ci = std::find(clusters.begin(), clusters.end(), pred[i]) - clusters.begin();
      const auto target = static_cast<std::size_t>(perm[static_cast<std::size_t>(ci)]);
      if (target < classes.size() && classes[target] == truth[i]) ++matched;
    }
    best = std::max(best, matched);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

/// ARI from the four O(N^2) pair counts (Hubert-Arabie form).
inline double pair_counting_ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  double both = 0, only_pred = 0, only_true = 0, neither = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      both += sp && st;
      only_pred += sp && !st;
      only_true += !sp && st;
      neither += !sp && !st;
    }
  }
  const double denom = (both + only_pred) * (only_pred + neither) + (both + only_true) * (only_true + neither);
  if (denom == 0.0) return 1.0;
  return 2.0 * (both * neither - only_pred * only_true) / denom;
}

/// NMI from per-point plug-in probabilities.
inline double plug_in_nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  const double n = static_cast<double>(pred.size());
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pa[pred[i]] += 1 / n;
    pb[truth[i]] += 1 / n;
    pab[{pred[i], truth[i]}] += 1 / n;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, p] : pa) ha -= p * std::log(p);
  for (auto& [k, p] : pb) hb -= p * std::log(p);
  for (auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  if (pa.size() == 1 && pb.size() == 1) return 1.0;
  if (pa.size() == 1 || pb.size() == 1) return 0.0;
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

}  // namespace oracle
