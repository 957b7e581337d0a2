#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mvd/ndgrad/adam.hpp"
#include "mvd/ndgrad/gradcheck.hpp"
#include "mvd/ndgrad/nn.hpp"
#include "mvd/ndgrad/ops.hpp"

namespace nd = mvd::ndgrad;
using nd::Matrix;
using nd::Tensor;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Values kept away from relu/clamp kinks so central differences are valid.
Matrix away_from_zero(Eigen::Index r, Eigen::Index c, nd::Rng& rng) {
  Matrix m = nd::random_normal(r, c, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = 0.3;
  }
  return m;
}

}  // namespace

TEST(NdgradForward, SoftmaxOfZerosIsUniform) {
  Tensor y = nd::softmax(Tensor::from_data({3}, {0, 0, 0}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(NdgradForward, SoftmaxSurvivesLargeLogits) {
  Tensor y = nd::softmax(Tensor::from_data({1, 2}, {1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
}

TEST(NdgradForward, L2NormalizeThreeFourFive) {
  Tensor y = nd::l2_normalize(Tensor::from_data({2}, {3, 4}));
  EXPECT_NEAR(y.data()[0], 0.6, 1e-15);
  EXPECT_NEAR(y.data()[1], 0.8, 1e-15);
}

TEST(NdgradForward, MatmulMatchesNaiveTripleLoop) {
  nd::Rng rng(7);
  Matrix a = nd::random_normal(2, 3, rng);
  Matrix b = nd::random_normal(3, 2, rng);
  Matrix got = nd::matmul(Tensor::from_matrix(a), Tensor::from_matrix(b)).value();
  Matrix want = naive_matmul(a, b);
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NdgradForward, ShapeAndDomainErrors) {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 3});
  EXPECT_THROW(nd::add(a, b), nd::ShapeError);
  EXPECT_THROW(nd::matmul(a, a), nd::ShapeError);
  EXPECT_THROW(nd::log(Tensor::from_data({2}, {1.0, 0.0})), nd::DomainError);
  EXPECT_THROW(nd::div(a, Tensor::zeros({1, 3})), nd::DomainError);
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), nd::ShapeError);
  EXPECT_THROW(Tensor::zeros({0, 2}), nd::ShapeError);
}

TEST(NdgradForward, BroadcastRowAndColumn) {
  Tensor x = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor row = Tensor::from_data({1, 2}, {10, 20});
  Tensor col = Tensor::from_data({2, 1}, {100, 200});
  EXPECT_EQ((x + row).data(), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ((x + col).data(), (std::vector<double>{101, 102, 203, 204}));
  EXPECT_EQ((x * Tensor::scalar(2.0)).data(), (std::vector<double>{2, 4, 6, 8}));
}

TEST(NdgradBackward, QuadraticGradient) {
  Tensor p = Tensor::parameter(Tensor::from_data({1, 3}, {1, 2, 3}).value());
  nd::Tape tape;
  nd::TapeScope scope(tape);
  auto grads = tape.backward(nd::sum(p * p));
  Matrix g = grads.at(p);
  EXPECT_DOUBLE_EQ(g(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(g(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(g(0, 2), 6.0);
}

TEST(NdgradBackward, LogSoftmaxPickIsOneHotMinusSoftmax) {
  nd::Rng rng(3);
  Tensor p = Tensor::parameter(nd::random_normal(1, 5, rng));
  const std::size_t k = 2;
  nd::Tape tape;
  nd::TapeScope scope(tape);
  Tensor loss = nd::slice_last(nd::log(nd::softmax(p)), k, k + 1);
  auto grads = tape.backward(nd::sum(loss));
  Matrix sm = nd::softmax(p.detach()).value();
  Matrix want = -sm;
  want(0, static_cast<Eigen::Index>(k)) += 1.0;
  EXPECT_LE((grads.at(p) - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NdgradBackward, NonScalarLossRejected) {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  nd::Tape tape;
  nd::TapeScope scope(tape);
  EXPECT_THROW(tape.backward(p * p), nd::ShapeError);
}

TEST(NdgradBackward, UnreachableParameterGetsZeros) {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 2));
  Tensor q = Tensor::parameter(Matrix::Ones(3, 1));
  nd::Tape tape;
  nd::TapeScope scope(tape);
  auto grads = tape.backward(nd::sum(p));
  EXPECT_FALSE(grads.contains(q));
  EXPECT_EQ(grads.at(q), Matrix::Zero(3, 1));
}

TEST(NdgradBackward, FanOutAccumulatesPathGradients) {
  Tensor p = Tensor::parameter(Tensor::from_data({1, 2}, {0.5, -1.5}).value());
  nd::Tape tape;
  nd::TapeScope scope(tape);
  // d/dp [sum(p^2) + sum(3p)] = 2p + 3
  auto grads = tape.backward(nd::sum(nd::square(p)) + nd::sum(p * 3.0));
  Matrix g = grads.at(p);
  EXPECT_DOUBLE_EQ(g(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(g(0, 1), 0.0);
}

TEST(NdgradBackward, NoTapeMeansNoRecording) {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 2));
  Tensor y = nd::exp(p);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(nd::backward(nd::sum(y)), std::logic_error);
}

// Every primitive, on random small shapes, against central differences.
TEST(NdgradProperty, EveryPrimitiveMatchesFiniteDifferences) {
  using Op = std::function<Tensor(const Tensor&, const Tensor&)>;
  struct Case {
    std::string name;
    Op op;
    bool positive_a = false;
    bool positive_b = false;
    bool b_is_row = false;
  };
  const std::vector<Case> cases = {
      {"add", [](auto& a, auto& b) { return a + b; }},
      {"add_row", [](auto& a, auto& b) { return a + b; }, false, false, true},
      {"sub", [](auto& a, auto& b) { return a - b; }},
      {"mul", [](auto& a, auto& b) { return a * b; }},
      {"mul_row", [](auto& a, auto& b) { return a * b; }, false, false, true},
      {"div", [](auto& a, auto& b) { return a / b; }, false, true},
      {"div_row", [](auto& a, auto& b) { return a / b; }, false, true, true},
      {"matmul_t", [](auto& a, auto& b) { return nd::matmul(a, nd::transpose(b)); }},
      {"neg_scale_shift", [](auto& a, auto&) { return (-a) * 1.7 + 0.3; }},
      {"exp", [](auto& a, auto&) { return nd::exp(a); }},
      {"log", [](auto& a, auto&) { return nd::log(a); }, true},
      {"tanh", [](auto& a, auto&) { return nd::tanh(a); }},
      {"relu", [](auto& a, auto&) { return nd::relu(a); }},
      {"square", [](auto& a, auto&) { return nd::square(a); }},
      {"clamp", [](auto& a, auto&) { return nd::clamp(a, -0.5, 0.5); }},
      {"softmax", [](auto& a, auto&) { return nd::softmax(a); }},
      {"log_softmax", [](auto& a, auto&) { return nd::log_softmax(a); }},
      {"logsumexp", [](auto& a, auto&) { return nd::logsumexp_last(a); }},
      {"l2_normalize", [](auto& a, auto&) { return nd::l2_normalize(a); }},
      {"sum_last", [](auto& a, auto&) { return nd::sum_last(a); }},
      {"mean_rows", [](auto& a, auto&) { return nd::mean_rows(a); }},
      {"mean", [](auto& a, auto&) { return nd::mean(a); }},
      {"concat", [](auto& a, auto& b) { return nd::concat_last({a, b}); }},
      {"concat_rows", [](auto& a, auto& b) { return nd::concat_rows({a, b}); }},
      {"slices",
       [](auto& a, auto&) {
         return nd::slice_rows(nd::slice_last(a, 0, a.cols()), 0, a.rows());
       }},
  };

  nd::Rng rng(2024);
  std::uniform_int_distribution<int> extent(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const Case& c = cases[static_cast<std::size_t>(trial) % cases.size()];
    const auto r = extent(rng);
    const auto k = extent(rng) + 1;
    Matrix av = away_from_zero(r, k, rng);
    Matrix bv = away_from_zero(c.b_is_row ? 1 : r, k, rng);
    if (c.positive_a) av = av.cwiseAbs().array() + 0.1;
    if (c.positive_b) bv = bv.cwiseAbs().array() + 0.1;
    Tensor a = Tensor::parameter(av);
    Tensor b = Tensor::parameter(bv);
    // A random linear read-out turns any output into a scalar with generic weights.
    Matrix probe;
    auto fn = [&]() {
      Tensor out = c.op(a, b);
      if (probe.size() == 0) probe = nd::random_normal(out.value().rows(), out.value().cols(), rng);
      return nd::sum(out * Tensor::from_matrix(probe));
    };
    fn();
    auto report = nd::gradient_check(fn, {a, b}, 1e-5, 1e-5);
    EXPECT_TRUE(report.passed) << c.name << " trial " << trial << " rel err " << report.max_relative_error;
  }
}

TEST(NdgradAdam, ZeroGradientsLeaveParametersUnchanged) {
  Tensor p = Tensor::parameter(Tensor::from_data({1, 3}, {1, -2, 3}).value());
  Matrix before = p.value();
  nd::Adam adam({p});
  adam.step(std::vector<Matrix>{Matrix::Zero(1, 3)});
  EXPECT_EQ(p.value(), before);
  EXPECT_EQ(adam.first_moments()[0], Matrix::Zero(1, 3));
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(NdgradAdam, SingleStepMatchesHandComputation) {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 1));
  nd::Adam adam({p}, {0.001, 0.9, 0.999, 1e-8});
  adam.step(std::vector<Matrix>{Matrix::Ones(1, 1)});
  // m_hat = 1, v_hat = 1 -> p - lr * 1 / (1 + eps)
  EXPECT_NEAR(p.value()(0, 0), 1.0 - 0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value()(0, 0), 0.999, 1e-9);
}

TEST(NdgradAdam, TwoStepsMatchRecurrence) {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.37;
  Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  nd::Adam adam({p}, {lr, b1, b2, eps});
  double x = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    adam.step(std::vector<Matrix>{Matrix::Constant(1, 1, g)});
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
  }
  EXPECT_NEAR(p.value()(0, 0), x, 1e-12);
  EXPECT_EQ(adam.step_count(), 2u);
}

TEST(NdgradAdam, ShapeMismatchRejected) {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  nd::Adam adam({p});
  EXPECT_THROW(adam.step(std::vector<Matrix>{Matrix::Ones(1, 2)}), nd::ShapeError);
}

TEST(NdgradGradCheck, HalfSquaredNormPasses) {
  nd::Rng rng(5);
  Tensor p = Tensor::parameter(nd::random_normal(3, 4, rng));
  auto report = nd::gradient_check([&] { return nd::sum(nd::square(p)) * 0.5; }, {p}, 1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(NdgradGradCheck, CorruptedBackwardRuleFails) {
  nd::Rng rng(6);
  Tensor p = Tensor::parameter(nd::random_normal(2, 3, rng));
  // exp with a derivative that is off by a factor of two
  auto bad_exp = [](const Tensor& a) {
    Matrix v = a.value().array().exp().matrix();
    return nd::make_result(a.shape(), v, {a}, [](nd::detail::Node& self) {
      self.inputs[0]->accumulate(2.0 * self.grad.cwiseProduct(self.value));
    });
  };
  auto report = nd::gradient_check([&] { return nd::sum(bad_exp(p)); }, {p});
  EXPECT_FALSE(report.passed);
}

TEST(NdgradGradCheck, NonFiniteValueRejected) {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 1));
  auto fn = [&] {
    return nd::make_result({}, Matrix::Constant(1, 1, 0.0), {p}, [](nd::detail::Node&) {}) *
           std::numeric_limits<double>::infinity();
  };
  EXPECT_THROW(nd::gradient_check(fn, {p}), nd::DomainError);
  EXPECT_THROW(nd::gradient_check([&] { return nd::sum(p); }, {p}, 0.0), std::invalid_argument);
}

TEST(NdgradDeterminism, SameSeedSameTrajectory) {
  auto run = [](std::uint64_t seed) {
    nd::Rng rng(seed);
    nd::Mlp net({4, 8, 1}, nd::Activation::kTanh, rng);
    Matrix x = nd::random_normal(16, 4, rng);
    Matrix y = nd::random_normal(16, 1, rng);
    nd::NamedTensors params;
    net.collect(params, "net");
    nd::Adam adam(nd::tensors_of(params), {0.01});
    std::vector<double> losses;
    for (int step = 0; step < 10; ++step) {
      nd::Tape tape;
      nd::TapeScope scope(tape);
      Tensor loss = nd::mean(nd::square(net(Tensor::from_matrix(x)) - Tensor::from_matrix(y)));
      losses.push_back(loss.item());
      adam.step(tape.backward(loss));
    }
    return losses;
  };
  auto a = run(11);
  auto b = run(11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_LT(a.back(), a.front());
}
