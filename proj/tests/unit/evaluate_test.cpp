#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "mvd/evaluate/kmeans.hpp"
#include "mvd/evaluate/metrics.hpp"
#include "mvd/evaluate/pca.hpp"
#include "mvd/evaluate/probe.hpp"
#include "mvd/ndgrad/nn.hpp"
#include "oracles.hpp"

namespace ev = mvd::evaluate;
using mvd::ndgrad::Matrix;

TEST(KMeans, TwoSeparatedPairs) {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 10, 0, 10, 1;
  auto r = ev::kmeans(x, 2, 1);
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  EXPECT_NEAR(r.inertia, 4 * 0.25, 1e-12);
}

TEST(KMeans, KEqualsNHasZeroInertia) {
  mvd::ndgrad::Rng rng(1);
  Matrix x = mvd::ndgrad::random_normal(12, 3, rng);
  EXPECT_NEAR(ev::kmeans(x, 12, 4).inertia, 0.0, 1e-12);
}

TEST(KMeans, MoreRestartsNeverWorse) {
  mvd::ndgrad::Rng rng(2);
  Matrix x = mvd::ndgrad::random_normal(200, 5, rng);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double one = ev::kmeans(x, 4, seed, {1, 300, 1e-6}).inertia;
    const double ten = ev::kmeans(x, 4, seed, {10, 300, 1e-6}).inertia;
    EXPECT_LE(ten, one);
  }
}

TEST(KMeans, RejectsBadK) {
  Matrix x = Matrix::Zero(3, 2);
  EXPECT_THROW(ev::kmeans(x, 4, 0), std::invalid_argument);
  EXPECT_THROW(ev::kmeans(x, 0, 0), std::invalid_argument);
}

TEST(KMeans, DeterministicGivenSeed) {
  mvd::ndgrad::Rng rng(3);
  Matrix x = mvd::ndgrad::random_normal(100, 4, rng);
  auto a = ev::kmeans(x, 5, 9);
  auto b = ev::kmeans(x, 5, 9);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(HungarianAcc, PermutedLabelsScoreOne) {
  std::vector<int> truth{0, 0, 1, 1, 2, 2, 3};
  std::vector<int> pred{7, 7, 3, 3, 5, 5, 1};
  EXPECT_DOUBLE_EQ(ev::hungarian_acc(pred, truth), 1.0);
}

TEST(HungarianAcc, ConstantPredictionOnBalancedTenClasses) {
  std::vector<int> truth;
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 7; ++i) truth.push_back(c);
  std::vector<int> pred(truth.size(), 0);
  EXPECT_DOUBLE_EQ(ev::hungarian_acc(pred, truth), 0.1);
}

TEST(HungarianAcc, LengthMismatchRejected) {
  std::vector<int> a{0, 1};
  std::vector<int> b{0};
  EXPECT_THROW(ev::hungarian_acc(a, b), std::invalid_argument);
}

TEST(HungarianAcc, EightPointHandcraftedTable) {
  std::vector<int> truth{0, 0, 0, 1, 1, 1, 2, 2};
  std::vector<int> pred{1, 1, 0, 0, 0, 2, 2, 1};
  // Exhaustive search over the 3! maps gives 5/8 (1->0, 0->1, 2->2).
  EXPECT_DOUBLE_EQ(ev::hungarian_acc(pred, truth), oracle::brute_force_acc(pred, truth));
  EXPECT_DOUBLE_EQ(ev::hungarian_acc(pred, truth), 5.0 / 8.0);
}

TEST(MetricOracles, FiftyRandomSmallInstancesMatchBruteForce) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 10)(rng);
    const int kp = std::uniform_int_distribution<int>(1, 5)(rng);
    const int kt = std::uniform_int_distribution<int>(1, 5)(rng);
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = std::uniform_int_distribution<int>(0, kp - 1)(rng);
      truth[i] = std::uniform_int_distribution<int>(0, kt - 1)(rng);
    }
    EXPECT_EQ(ev::hungarian_acc(pred, truth), oracle::brute_force_acc(pred, truth)) << trial;
    EXPECT_NEAR(ev::ari(pred, truth), oracle::pair_counting_ari(pred, truth), 1e-12) << trial;
    EXPECT_NEAR(ev::nmi(pred, truth), oracle::plug_in_nmi(pred, truth), 1e-12) << trial;
  }
}

TEST(HungarianAcc, InvariantToPredictedRelabeling) {
  std::mt19937_64 rng(5);
  std::vector<int> truth(60), pred(60);
  for (int i = 0; i < 60; ++i) {
    truth[i] = i % 4;
    pred[i] = std::uniform_int_distribution<int>(0, 4)(rng);
  }
  std::vector<int> perm{3, 0, 4, 1, 2};
  std::vector<int> relabeled;
  for (int p : pred) relabeled.push_back(perm[p]);
  EXPECT_DOUBLE_EQ(ev::hungarian_acc(pred, truth), ev::hungarian_acc(relabeled, truth));
}

TEST(Nmi, Conventions) {
  std::vector<int> a{0, 0, 1, 1, 2};
  EXPECT_NEAR(ev::nmi(a, a), 1.0, 1e-12);
  std::vector<int> constant(5, 3);
  EXPECT_EQ(ev::nmi(constant, a), 0.0);
  EXPECT_EQ(ev::nmi(constant, constant), 1.0);
}

TEST(Nmi, SixPointHandComputed) {
  // Table [[2,1],[0,3]]: H(pred) = H(true) = ln 2; I = (2/6)ln 2 + (1/6)ln(1/2*...)...
  std::vector<int> pred{0, 0, 0, 1, 1, 1};
  std::vector<int> truth{0, 0, 1, 1, 1, 1};
  // p(x,y): (0,0)=2/6 (0,1)=1/6 (1,1)=3/6; px = {1/2,1/2}; py = {1/3,2/3}
  const double i = (2.0 / 6) * std::log((2.0 / 6) / (0.5 / 3)) + (1.0 / 6) * std::log((1.0 / 6) / (0.5 * 2 / 3)) +
                   (3.0 / 6) * std::log((3.0 / 6) / (0.5 * 2 / 3));
  const double hp = std::log(2.0);
  const double ht = -(1.0 / 3) * std::log(1.0 / 3) - (2.0 / 3) * std::log(2.0 / 3);
  EXPECT_NEAR(ev::nmi(pred, truth), i / std::sqrt(hp * ht), 1e-12);
}

TEST(Ari, Conventions) {
  std::vector<int> a{0, 1, 1, 2, 2, 2};
  EXPECT_NEAR(ev::ari(a, a), 1.0, 1e-12);
  std::vector<int> singletons{0, 1, 2, 3, 4, 5};
  std::vector<int> one(6, 0);
  EXPECT_NEAR(ev::ari(singletons, one), 0.0, 1e-12);
  EXPECT_EQ(ev::ari(one, one), 1.0);
}

TEST(Ari, TenPointPairCounting) {
  std::vector<int> pred{0, 0, 1, 1, 1, 2, 2, 0, 1, 2};
  std::vector<int> truth{0, 0, 0, 1, 1, 1, 2, 2, 2, 2};
  EXPECT_NEAR(ev::ari(pred, truth), oracle::pair_counting_ari(pred, truth), 1e-12);
}

TEST(Ari, IndependentLabelingsCenterOnZero) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> label(0, 9);
  double total = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<int> a(1000), b(1000);
    for (int i = 0; i < 1000; ++i) {
      a[i] = label(rng);
      b[i] = label(rng);
    }
    total += ev::ari(a, b);
  }
  EXPECT_LE(std::abs(total / 50), 0.01);
}

TEST(Metrics, SymmetricInArguments) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<int> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[i] = std::uniform_int_distribution<int>(0, 3)(rng);
      b[i] = std::uniform_int_distribution<int>(0, 5)(rng);
    }
    EXPECT_NEAR(ev::nmi(a, b), ev::nmi(b, a), 1e-14);
    EXPECT_NEAR(ev::ari(a, b), ev::ari(b, a), 1e-14);
  }
}

TEST(Assignment, RectangularCost) {
  Eigen::MatrixXd cost(2, 3);
  cost << 4, 1, 3, 2, 0, 5;
  auto a = ev::solve_assignment(cost);
  EXPECT_EQ(a[0], 1);
  EXPECT_EQ(a[1], 0);
}

TEST(LinearProbe, SeparableBlobs) {
  mvd::ndgrad::Rng rng(4);
  Matrix x = mvd::ndgrad::random_normal(400, 3, rng, 0.3);
  std::vector<int> y(400);
  for (int i = 0; i < 400; ++i) {
    y[i] = i % 2;
    x(i, 0) += y[i] == 0 ? -2.0 : 2.0;
  }
  auto r = ev::linear_probe_split(x, y, 1);
  EXPECT_GE(r.accuracy, 0.99);
  EXPECT_GE(r.macro_f1, 0.99);
}

TEST(LinearProbe, ShuffledLabelsAtChance) {
  mvd::ndgrad::Rng rng(5);
  const int n = 4000;
  Matrix x = mvd::ndgrad::random_normal(n, 8, rng);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % 4;
  std::shuffle(y.begin(), y.end(), rng);
  auto r = ev::linear_probe_split(x, y, 2);
  EXPECT_NEAR(r.accuracy, 0.25, 0.05);
}

TEST(LinearProbe, DegenerateInputsRejected) {
  Matrix x = Matrix::Ones(10, 2);
  std::vector<int> one_class(10, 1);
  EXPECT_THROW(ev::linear_probe_split(x, one_class, 0), ev::StratificationError);
  std::vector<int> ytr{0, 0, 1, 1};
  std::vector<int> yte{2};
  EXPECT_THROW(ev::linear_probe(Matrix::Ones(4, 2), ytr, Matrix::Ones(1, 2), yte), ev::StratificationError);
}

TEST(LinearProbe, StratifiedSplitKeepsEveryClass) {
  std::vector<int> y;
  for (int i = 0; i < 53; ++i) y.push_back(i % 5);
  auto split = ev::stratified_split(y, 0.8, 3);
  EXPECT_EQ(split.train.size() + split.test.size(), y.size());
  std::set<int> train_classes;
  for (auto i : split.train) train_classes.insert(y[i]);
  EXPECT_EQ(train_classes.size(), 5u);
}

TEST(Regression, RecoversLinearTarget) {
  mvd::ndgrad::Rng rng(9);
  Matrix x = mvd::ndgrad::random_normal(300, 3, rng);
  Matrix y = x * Matrix::Constant(3, 2, 0.7);
  EXPECT_NEAR(ev::linear_regression_r2(x, y), 1.0, 1e-12);
}

TEST(Pca, LineIn5DIsOneComponent) {
  mvd::ndgrad::Rng rng(6);
  Matrix t = mvd::ndgrad::random_normal(200, 1, rng);
  Eigen::RowVectorXd dir(5);
  dir << 1, -2, 0.5, 3, 1;
  Matrix x = t * dir;
  auto p = ev::pca_project(x);
  EXPECT_GE(p.explained_ratio[0], 0.999);
}

TEST(Pca, IsotropicGaussianSplitsVarianceEvenly) {
  mvd::ndgrad::Rng rng(7);
  const int d = 5;
  Matrix x = mvd::ndgrad::random_normal(20000, d, rng);
  auto p = ev::pca_project(x);
  for (double r : p.explained_ratio) EXPECT_NEAR(r, 1.0 / d, 0.3 / d);
}

TEST(Pca, RotationCommutesUpToSign) {
  mvd::ndgrad::Rng rng(8);
  Matrix x = mvd::ndgrad::random_normal(300, 4, rng);
  x.col(0) *= 3.0;
  x.col(1) *= 2.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(mvd::ndgrad::random_normal(4, 4, rng));
  Eigen::MatrixXd rot = qr.householderQ();
  auto a = ev::pca_project(x);
  auto b = ev::pca_project(x * rot);
  for (int k = 0; k < 2; ++k) {
    const double same = (a.coords.col(k) - b.coords.col(k)).cwiseAbs().maxCoeff();
    const double flipped = (a.coords.col(k) + b.coords.col(k)).cwiseAbs().maxCoeff();
    EXPECT_LE(std::min(same, flipped), 1e-9);
  }
}

TEST(Pca, ZeroVarianceGivesZeros) {
  auto p = ev::pca_project(Matrix::Constant(10, 3, 2.0));
  EXPECT_EQ(p.coords, Matrix::Zero(10, 2));
  EXPECT_THROW(ev::pca_project(Matrix::Ones(4, 1)), std::invalid_argument);
}

TEST(MetricsRecord, RangeValidation) {
  ev::MetricsRecord ok{0.9, 0.8, -0.1, 0.95, 0.94};
  EXPECT_NO_THROW(ok.validate());
  ev::MetricsRecord bad = ok;
  bad.nmi = 1.5;
  EXPECT_THROW(bad.validate(), std::domain_error);
}
