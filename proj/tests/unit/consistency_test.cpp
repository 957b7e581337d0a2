#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mvd/consistency/losses.hpp"
#include "mvd/consistency/stage1.hpp"
#include "mvd/datasets/synthetic.hpp"
#include "mvd/evaluate/metrics.hpp"
#include "mvd/ndgrad/gradcheck.hpp"
#include "mvd/ndgrad/ops.hpp"

namespace cs = mvd::consistency;
namespace nd = mvd::ndgrad;
using nd::Matrix;
using nd::Tensor;

namespace {

std::vector<Tensor> random_unit_blocks(std::size_t blocks, Eigen::Index b, Eigen::Index d, nd::Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < blocks; ++i) {
    Matrix m = nd::random_normal(b, d, rng);
    m.rowwise().normalize();
    out.push_back(Tensor::from_matrix(m));
  }
  return out;
}

// Direct enumeration: every anchor, every positive (same instance, block of
// another view), denominator over every non-anchor vector.
double enumerated_infonce(const std::vector<Matrix>& blocks, double tau, std::size_t per_view = 1) {
  const std::size_t nb = blocks.size();
  const Eigen::Index b = blocks[0].rows();
  double total = 0.0;
  int terms = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    for (Eigen::Index k = 0; k < b; ++k) {
      double denom = 0.0;
      for (std::size_t j = 0; j < nb; ++j) {
        for (Eigen::Index m = 0; m < b; ++m) {
          if (i == j && k == m) continue;
          denom += std::exp(blocks[i].row(k).dot(blocks[j].row(m)) / tau);
        }
      }
      for (std::size_t j = 0; j < nb; ++j) {
        if (j / per_view == i / per_view) continue;
        total += -std::log(std::exp(blocks[i].row(k).dot(blocks[j].row(k)) / tau) / denom);
        ++terms;
      }
    }
  }
  return total / terms;
}

Matrix simplex_rows(Eigen::Index rows, Eigen::Index cols, nd::Rng& rng) {
  Matrix m = nd::random_uniform(rows, cols, rng, 0.05, 1.0);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) /= m.row(r).sum();
  return m;
}

}  // namespace

TEST(ContrastiveLoss, IdenticalVectorsGiveLogMMinusOne) {
  for (int v : {2, 3}) {
    for (int b : {2, 5}) {
      Matrix row = Matrix::Zero(1, 4);
      row(0, 1) = 1.0;
      std::vector<Tensor> blocks(2 * v, Tensor::from_matrix(row.replicate(b, 1)));
      const double m = 2.0 * b * v;
      EXPECT_NEAR(cs::contrastive_loss(blocks, 0.5).item(), std::log(m - 1), 1e-9);
      EXPECT_NEAR(cs::contrastive_loss(blocks, 0.5, 2).item(), std::log(m - 1), 1e-9);
    }
  }
}

TEST(ContrastiveLoss, HugeTemperatureApproachesUniform) {
  nd::Rng rng(1);
  auto blocks = random_unit_blocks(4, 6, 5, rng);
  EXPECT_NEAR(cs::contrastive_loss(blocks, 1e6).item(), std::log(4.0 * 6 - 1), 1e-3);
}

TEST(ContrastiveLoss, HandBuiltBatchMatchesEnumeration) {
  // B = 2, V = 2: instance 0 along e0, instance 1 along e1, identical in all four blocks.
  Matrix block(2, 3);
  block << 1, 0, 0, 0, 1, 0;
  std::vector<Matrix> raw(4, block);
  std::vector<Tensor> blocks;
  for (auto& m : raw) blocks.push_back(Tensor::from_matrix(m));
  const double e = std::exp(1.0);
  // Each anchor: 3 positives at sim 1, 4 negatives at sim 0.
  const double expected = -std::log(e / (3 * e + 4));
  EXPECT_NEAR(cs::contrastive_loss(blocks, 1.0).item(), expected, 1e-12);
  EXPECT_NEAR(enumerated_infonce(raw, 1.0), expected, 1e-12);
  // Two copies per view: 2 cross-view positives, the same-view copy only in the denominator.
  EXPECT_NEAR(cs::contrastive_loss(blocks, 1.0, 2).item(), expected, 1e-12);
  EXPECT_NEAR(enumerated_infonce(raw, 1.0, 2), expected, 1e-12);
}

TEST(ContrastiveLoss, SameViewCopiesAreNotPositives) {
  // Copies of one view agree perfectly while the views disagree: grouping by view must see that.
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b << 0, 1, 1, 0;
  std::vector<Tensor> blocks{Tensor::from_matrix(a), Tensor::from_matrix(a), Tensor::from_matrix(b),
                             Tensor::from_matrix(b)};
  const double e = std::exp(1.0);
  const double denom = 3 * e + 4;
  EXPECT_NEAR(cs::contrastive_loss(blocks, 1.0, 2).item(), -std::log(1.0 / denom), 1e-12);
  EXPECT_NEAR(cs::contrastive_loss(blocks, 1.0, 1).item(),
              (-std::log(e / denom) - 2 * std::log(1.0 / denom)) / 3.0, 1e-12);
}

TEST(ContrastiveLoss, RandomBatchesMatchEnumeration) {
  nd::Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    auto blocks = random_unit_blocks(4, 3, 4, rng);
    std::vector<Matrix> raw;
    for (auto& b : blocks) raw.push_back(b.value());
    EXPECT_NEAR(cs::contrastive_loss(blocks, 0.5).item(), enumerated_infonce(raw, 0.5), 1e-12);
    EXPECT_NEAR(cs::contrastive_loss(blocks, 0.5, 2).item(), enumerated_infonce(raw, 0.5, 2), 1e-12);
  }
  nd::Rng wide(21);
  auto six = random_unit_blocks(6, 3, 4, wide);
  std::vector<Matrix> raw;
  for (auto& b : six) raw.push_back(b.value());
  EXPECT_NEAR(cs::contrastive_loss(six, 0.7, 2).item(), enumerated_infonce(raw, 0.7, 2), 1e-12);
  EXPECT_NEAR(cs::contrastive_loss(six, 0.7, 3).item(), enumerated_infonce(raw, 0.7, 3), 1e-12);
}

TEST(ContrastiveLoss, RotationInvariantAndNonNegative) {
  nd::Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    auto blocks = random_unit_blocks(4, 5, 6, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(nd::random_normal(6, 6, rng));
    Matrix q = qr.householderQ();
    std::vector<Tensor> rotated;
    for (auto& b : blocks) rotated.push_back(Tensor::from_matrix(b.value() * q));
    const double base = cs::contrastive_loss(blocks, 0.5).item();
    EXPECT_GE(base, 0.0);
    EXPECT_NEAR(cs::contrastive_loss(rotated, 0.5).item(), base, 1e-10);
  }
}

TEST(ContrastiveLoss, RejectsBatchWithoutNegatives) {
  nd::Rng rng(4);
  auto blocks = random_unit_blocks(4, 1, 3, rng);
  EXPECT_THROW(cs::contrastive_loss(blocks, 0.5), std::invalid_argument);
  auto ok = random_unit_blocks(4, 2, 3, rng);
  EXPECT_THROW(cs::contrastive_loss(ok, 0.0), std::invalid_argument);
  EXPECT_THROW(cs::contrastive_loss(ok, 0.5, 3), std::invalid_argument);
  EXPECT_THROW(cs::contrastive_loss(ok, 0.5, 4), std::invalid_argument);
  EXPECT_THROW(cs::contrastive_loss(ok, 0.5, 0), std::invalid_argument);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  nd::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<Tensor> raw;
    for (int i = 0; i < 4; ++i) raw.push_back(Tensor::parameter(nd::random_normal(4, 3, rng)));
    auto fn = [&] {
      std::vector<Tensor> z;
      for (auto& r : raw) z.push_back(nd::l2_normalize(r));
      return cs::contrastive_loss(z, 0.5, 1 + t % 2);
    };
    auto report = nd::gradient_check(fn, raw, 1e-5, 1e-5);
    EXPECT_TRUE(report.passed) << t << " err " << report.max_relative_error;
  }
}

TEST(ClusteringLoss, AnalyticCases) {
  Matrix onehot = Matrix::Zero(3, 4);
  for (int r = 0; r < 3; ++r) onehot(r, r) = 1.0;
  std::vector<Tensor> same(2, Tensor::from_matrix(onehot));
  EXPECT_NEAR(cs::clustering_loss(same, 0.0).total.item(), 0.0, 1e-12);

  std::vector<Tensor> uniform(2, Tensor::full({5, 10}, 0.1));
  EXPECT_NEAR(cs::clustering_loss(uniform, 1.0).total.item(), 0.0, 1e-9);
  EXPECT_NEAR(cs::clustering_loss(uniform, 2.0).total.item(), -std::log(10.0), 1e-9);
}

TEST(ClusteringLoss, HandEvaluatedDotProducts) {
  Matrix a(2, 2), b(2, 2);
  a << 0.9, 0.1, 0.2, 0.8;
  b << 0.8, 0.2, 0.3, 0.7;
  std::vector<Tensor> views{Tensor::from_matrix(a), Tensor::from_matrix(b)};
  EXPECT_NEAR(cs::clustering_loss(views, 0.0).total.item(), -0.5 * (std::log(0.74) + std::log(0.62)), 1e-12);
}

TEST(ClusteringLoss, EntropyTermBounds) {
  const int c = 5;
  Tensor uniform = Tensor::full({4, c}, 1.0 / c);
  EXPECT_NEAR(cs::negative_entropy(uniform).item(), -std::log(c), 1e-12);
  Matrix collapsed = Matrix::Zero(4, c);
  collapsed.col(2).setOnes();
  EXPECT_NEAR(cs::negative_entropy(Tensor::from_matrix(collapsed)).item(), 0.0, 1e-12);
  nd::Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const double v = cs::negative_entropy(Tensor::from_matrix(simplex_rows(6, c, rng))).item();
    EXPECT_GE(v, -std::log(c) - 1e-12);
    EXPECT_LE(v, 1e-12);
  }
}

TEST(ClusteringLoss, AgreementNonNegativeAndZeroOnlyForAlignedOneHots) {
  nd::Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    Tensor a = Tensor::from_matrix(simplex_rows(5, 3, rng));
    Tensor b = Tensor::from_matrix(simplex_rows(5, 3, rng));
    EXPECT_GT(cs::agreement_loss(a, b).item(), 0.0);
  }
  Matrix disjoint_a = Matrix::Zero(1, 2), disjoint_b = Matrix::Zero(1, 2);
  disjoint_a(0, 0) = 1.0;
  disjoint_b(0, 1) = 1.0;
  EXPECT_NEAR(cs::agreement_loss(Tensor::from_matrix(disjoint_a), Tensor::from_matrix(disjoint_b)).item(),
              -std::log(1e-12), 1e-9);
}

TEST(ClusteringLoss, GradientMatchesFiniteDifferences) {
  nd::Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<Tensor> logits;
    for (int v = 0; v < 3; ++v) logits.push_back(Tensor::parameter(nd::random_normal(4, 3, rng)));
    Tensor extra = Tensor::parameter(nd::random_normal(4, 3, rng));
    auto fn = [&] {
      std::vector<Tensor> assign;
      for (auto& l : logits) assign.push_back(nd::softmax(l));
      std::vector<std::pair<Tensor, Tensor>> pairs{{assign[0], nd::softmax(extra)}};
      return cs::clustering_loss(assign, 2.0, pairs).total;
    };
    std::vector<Tensor> params = logits;
    params.push_back(extra);
    auto report = nd::gradient_check(fn, params, 1e-5, 1e-5);
    EXPECT_TRUE(report.passed) << t << " err " << report.max_relative_error;
  }
}

TEST(ClusteringLoss, ThroughModelGradient) {
  nd::Rng rng(9);
  cs::Stage1Config cfg;
  cfg.hidden = {6};
  cfg.embed_dim = 4;
  cfg.proj_dim = 3;
  cfg.num_clusters = 3;
  cs::ConsistentModel model({5, 5}, cfg, rng);
  Tensor x0 = Tensor::from_matrix(nd::random_normal(4, 5, rng));
  Tensor x1 = Tensor::from_matrix(nd::random_normal(4, 5, rng));
  auto fn = [&] {
    std::vector<Tensor> z{model.project(model.embed(0, x0)), model.project(model.embed(0, x0 * 1.1)),
                          model.project(model.embed(1, x1)), model.project(model.embed(1, x1 * 0.9))};
    std::vector<Tensor> a{model.assign(model.embed(0, x0)), model.assign(model.embed(1, x1))};
    return cs::contrastive_loss(z, 0.5, 2) + cs::clustering_loss(a, 2.0).total;
  };
  auto report = nd::gradient_check(fn, nd::tensors_of(model.parameters()), 1e-5, 1e-5);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(MineNeighbors, CoincidentPointsNameEachOther) {
  Matrix e(3, 2);
  e << 1, 0, 1, 0, 0, 1;
  auto nn = cs::mine_neighbors(e, 1);
  EXPECT_EQ(nn[0], std::vector<std::size_t>{1});
  EXPECT_EQ(nn[1], std::vector<std::size_t>{0});
}

TEST(MineNeighbors, MatchesBruteForce) {
  nd::Rng rng(10);
  Matrix e = nd::random_normal(100, 8, rng);
  const std::size_t k = 7;
  auto nn = cs::mine_neighbors(e, k);
  for (Eigen::Index i = 0; i < 100; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (Eigen::Index j = 0; j < 100; ++j) {
      if (j == i) continue;
      const double cos = e.row(i).dot(e.row(j)) / (e.row(i).norm() * e.row(j).norm());
      dist.emplace_back(1.0 - cos, static_cast<std::size_t>(j));
    }
    std::sort(dist.begin(), dist.end());
    ASSERT_EQ(nn[static_cast<std::size_t>(i)].size(), k);
    for (std::size_t r = 0; r < k; ++r) EXPECT_EQ(nn[static_cast<std::size_t>(i)][r], dist[r].second);
  }
}

TEST(MineNeighbors, BoundsRejected) {
  Matrix e = Matrix::Ones(4, 2);
  EXPECT_THROW(cs::mine_neighbors(e, 0), std::invalid_argument);
  EXPECT_THROW(cs::mine_neighbors(e, 4), std::invalid_argument);
}

TEST(Pseudolabels, ZeroHeadGivesUniformAndLowestIndex) {
  mvd::datasets::SyntheticSpec spec;
  spec.num_instances = 40;
  auto data = mvd::datasets::gen_synthetic(spec);
  cs::Stage1Config cfg;
  cfg.hidden = {16};
  cfg.embed_dim = 8;
  nd::Rng rng(0);
  cs::ConsistentModel model({24, 24}, cfg, rng);
  model.cluster_head().weight().mutable_value().setZero();
  auto out = cs::assign_pseudolabels(model, data);
  EXPECT_NEAR((out.fused.probs.array() - 0.25).abs().maxCoeff(), 0.0, 1e-12);
  for (int h : out.fused.hard) EXPECT_EQ(h, 0);
  EXPECT_EQ(out.consistent.cols(), 8);
  EXPECT_TRUE(out.consistent.isApprox(0.5 * (out.view_embeddings[0] + out.view_embeddings[1])));
}

TEST(Pseudolabels, ArgmaxInvariantToTemperature) {
  nd::Rng rng(11);
  Matrix logits = nd::random_normal(50, 6, rng);
  const auto base = cs::argmax_rows(nd::softmax(Tensor::from_matrix(logits)).value());
  for (double t : {0.1, 0.5, 3.0}) {
    EXPECT_EQ(cs::argmax_rows(nd::softmax(Tensor::from_matrix(logits / t)).value()), base);
  }
  Matrix tie(1, 3);
  tie << 0.4, 0.4, 0.2;
  EXPECT_EQ(cs::argmax_rows(tie)[0], 0);
}

TEST(Batches, CoverEveryIndexOnce) {
  nd::Rng rng(12);
  auto batches = mvd::datasets::minibatches(301, 100, rng);
  std::vector<int> seen(301, 0);
  for (auto& b : batches)
    for (auto i : b) ++seen[i];
  EXPECT_EQ(batches.size(), 3u);
  EXPECT_EQ(std::accumulate(seen.begin(), seen.end(), 0), 300);  // trailing singleton dropped
}

namespace {

struct SmallRun {
  mvd::datasets::MultiViewBatch data;
  cs::Stage1Config cfg;
  cs::Stage1Result result;
};

const SmallRun& small_run() {
  static const SmallRun run = [] {
    SmallRun r;
    mvd::datasets::SyntheticSpec spec;
    spec.num_instances = 600;
    r.data = mvd::datasets::gen_synthetic(spec);
    r.cfg.hidden = {128, 64};
    r.cfg.epochs_pretrain = 20;
    r.cfg.epochs_cluster = 15;
    r.cfg.batch_size = 100;
    r.result = cs::stage1_train(r.data, r.cfg);
    return r;
  }();
  return run;
}

}  // namespace

TEST(Stage1Train, PretrainBeatsUniformBaseline) {
  const auto& run = small_run();
  const double m = 2.0 * run.cfg.batch_size * 2;
  double last = 0.0;
  for (const auto& row : run.result.curve) {
    if (row.phase == "pretrain") last = row.l_ins;
  }
  EXPECT_LT(last, std::log(m - 1));
}

TEST(Stage1Train, ClusterPhaseKeepsEntropyHigh) {
  const auto& run = small_run();
  const auto& last = run.result.curve.back();
  ASSERT_EQ(last.phase, "cluster");
  EXPECT_GE(last.entropy, 0.8 * std::log(4.0));
}

TEST(Stage1Train, PseudolabelsRecoverClassesAndAgreeAcrossViews) {
  const auto& run = small_run();
  auto out = cs::assign_pseudolabels(run.result.model, run.data);
  EXPECT_GE(mvd::evaluate::hungarian_acc(out.fused.hard, *run.data.labels), 0.9);
  std::size_t agree = 0;
  for (std::size_t k = 0; k < run.data.size(); ++k) agree += out.per_view[0].hard[k] == out.per_view[1].hard[k];
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(run.data.size()), 0.95);
}

TEST(Stage1Train, DeterministicRerun) {
  const auto& run = small_run();
  auto cfg = run.cfg;
  cfg.epochs_pretrain = 2;
  cfg.epochs_cluster = 2;
  auto a = cs::stage1_train(run.data, cfg);
  auto b = cs::stage1_train(run.data, cfg);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_NEAR(a.curve[i].l_ins, b.curve[i].l_ins, 1e-9);
    EXPECT_NEAR(a.curve[i].l_clu, b.curve[i].l_clu, 1e-9);
  }
}

TEST(Stage1Train, KnnPairsAndDisabledPhases) {
  const auto& run = small_run();
  auto cfg = run.cfg;
  cfg.epochs_pretrain = 1;
  cfg.epochs_cluster = 1;
  cfg.use_knn = true;
  auto with_knn = cs::stage1_train(run.data, cfg);
  EXPECT_EQ(with_knn.curve.size(), 2u);
  cfg.enable_ins = false;
  auto clu_only = cs::stage1_train(run.data, cfg);
  ASSERT_EQ(clu_only.curve.size(), 1u);
  EXPECT_EQ(clu_only.curve[0].phase, "cluster");
  cfg.num_clusters = 1;
  EXPECT_THROW(cs::stage1_train(run.data, cfg), std::invalid_argument);
}
