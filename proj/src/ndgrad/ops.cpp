#include "mvd/ndgrad/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mvd::ndgrad {

namespace {

using Index = Eigen::Index;
using detail::Node;

bool broadcastable(const Matrix& m, Index rows, Index cols) {
  return (m.rows() == rows || m.rows() == 1) && (m.cols() == cols || m.cols() == 1);
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

struct BroadcastPlan {
  Shape shape;
  Index rows;
  Index cols;
};

BroadcastPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Index rows = std::max(av.rows(), bv.rows());
  Index cols = std::max(av.cols(), bv.cols());
  if (!broadcastable(av, rows, cols) || !broadcastable(bv, rows, cols)) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  Shape shape;
  if (av.rows() == rows && av.cols() == cols) {
    shape = a.shape();
  } else if (bv.rows() == rows && bv.cols() == cols) {
    shape = b.shape();
  } else {
    shape = {static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
  }
  return {std::move(shape), rows, cols};
}

Shape rows_by_one(const Tensor& a) {
  Shape s = a.shape();
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, 1};
  s.back() = 1;
  return s;
}

template <typename Fn>
Tensor unary(const Tensor& a, Matrix value, Fn grad_fn) {
  return make_result(a.shape(), std::move(value), {a}, [grad_fn](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(grad_fn(self, in));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a, b, "add");
  Matrix value = expand(a.value(), plan.rows, plan.cols) + expand(b.value(), plan.rows, plan.cols);
  return make_result(plan.shape, std::move(value), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate(reduce_to(self.grad, in->value.rows(), in->value.cols()));
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a, b, "sub");
  Matrix value = expand(a.value(), plan.rows, plan.cols) - expand(b.value(), plan.rows, plan.cols);
  return make_result(plan.shape, std::move(value), {a, b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate(reduce_to(self.grad, x.value.rows(), x.value.cols()));
    if (y.requires_grad) y.accumulate(-reduce_to(self.grad, y.value.rows(), y.value.cols()));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a, b, "mul");
  Matrix value = expand(a.value(), plan.rows, plan.cols).cwiseProduct(expand(b.value(), plan.rows, plan.cols));
  return make_result(plan.shape, std::move(value), {a, b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    Index r = self.value.rows();
    Index c = self.value.cols();
    if (x.requires_grad) {
      x.accumulate(reduce_to(self.grad.cwiseProduct(expand(y.value, r, c)), x.value.rows(), x.value.cols()));
    }
    if (y.requires_grad) {
      y.accumulate(reduce_to(self.grad.cwiseProduct(expand(x.value, r, c)), y.value.rows(), y.value.cols()));
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a, b, "div");
  if ((b.value().array() == 0.0).any()) throw DomainError("div: zero divisor");
  Matrix bx = expand(b.value(), plan.rows, plan.cols);
  Matrix value = expand(a.value(), plan.rows, plan.cols).cwiseQuotient(bx);
  return make_result(plan.shape, std::move(value), {a, b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    Index r = self.value.rows();
    Index c = self.value.cols();
    Matrix yb = expand(y.value, r, c);
    if (x.requires_grad) {
      x.accumulate(reduce_to(self.grad.cwiseQuotient(yb), x.value.rows(), x.value.cols()));
    }
    if (y.requires_grad) {
      Matrix gy = -self.grad.cwiseProduct(self.value).cwiseQuotient(yb);
      y.accumulate(reduce_to(gy, y.value.rows(), y.value.cols()));
    }
  });
}

Tensor neg(const Tensor& a) {
  return unary(a, -a.value(), [](Node& self, Node&) -> Matrix { return -self.grad; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, a.value() * factor, [factor](Node& self, Node&) -> Matrix { return self.grad * factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, (a.value().array() + offset).matrix(), [](Node& self, Node&) -> Matrix { return self.grad; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  Matrix value = a.value() * b.value();
  Shape shape{a.rows(), b.cols()};
  return make_result(std::move(shape), std::move(value), {a, b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.accumulate(self.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required, got " + shape_to_string(a.shape()));
  Matrix value = a.value().transpose();
  Shape shape{a.cols(), a.rows()};
  return make_result(std::move(shape), std::move(value), {a},
                     [](Node& self) { self.inputs[0]->accumulate(self.grad.transpose()); });
}

Tensor exp(const Tensor& a) {
  Matrix value = a.value().array().exp().matrix();
  return unary(a, std::move(value),
               [](Node& self, Node&) -> Matrix { return self.grad.cwiseProduct(self.value); });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw DomainError("log: non-positive input");
  Matrix value = a.value().array().log().matrix();
  return unary(a, std::move(value),
               [](Node& self, Node& in) -> Matrix { return self.grad.cwiseQuotient(in.value); });
}

Tensor tanh(const Tensor& a) {
  Matrix value = a.value().array().tanh().matrix();
  return unary(a, std::move(value), [](Node& self, Node&) -> Matrix {
    return (self.grad.array() * (1.0 - self.value.array().square())).matrix();
  });
}

Tensor relu(const Tensor& a) {
  Matrix value = a.value().cwiseMax(0.0);
  return unary(a, std::move(value), [](Node& self, Node& in) -> Matrix {
    return (in.value.array() > 0.0).select(self.grad, 0.0).matrix();
  });
}

Tensor square(const Tensor& a) {
  Matrix value = a.value().array().square().matrix();
  return unary(a, std::move(value),
               [](Node& self, Node& in) -> Matrix { return 2.0 * self.grad.cwiseProduct(in.value); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  Matrix value = a.value().cwiseMax(lo).cwiseMin(hi);
  return unary(a, std::move(value), [lo, hi](Node& self, Node& in) -> Matrix {
    return (in.value.array() > lo && in.value.array() < hi).select(self.grad, 0.0).matrix();
  });
}

Tensor clamp_min(const Tensor& a, double lo) { return clamp(a, lo, std::numeric_limits<double>::infinity()); }

Tensor softmax(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix value = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  value.array().colwise() /= value.rowwise().sum().array();
  return unary(a, std::move(value), [](Node& self, Node&) -> Matrix {
    // dx = y * (g - <g, y>)
    Eigen::VectorXd dot = self.grad.cwiseProduct(self.value).rowwise().sum();
    return self.value.cwiseProduct(self.grad.colwise() - dot);
  });
}

Tensor log_softmax(const Tensor& a) {
  const Matrix& x = a.value();
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix value = shifted.colwise() - lse;
  return unary(a, std::move(value), [](Node& self, Node&) -> Matrix {
    Matrix probs = self.value.array().exp().matrix();
    Eigen::VectorXd gsum = self.grad.rowwise().sum();
    return self.grad - probs.cwiseProduct(gsum.replicate(1, probs.cols()));
  });
}

Tensor logsumexp_last(const Tensor& a) {
  const Matrix& x = a.value();
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Eigen::VectorXd lse = ((x.colwise() - mx).array().exp().rowwise().sum().log().matrix() + mx);
  Matrix value = lse;
  return make_result(rows_by_one(a), std::move(value), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    Matrix probs = (in.value.colwise() - Eigen::VectorXd(self.value.col(0))).array().exp().matrix();
    in.accumulate(probs.cwiseProduct(self.grad.replicate(1, probs.cols())));
  });
}

Tensor l2_normalize(const Tensor& a, double eps) {
  const Matrix& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm().cwiseMax(eps);
  Matrix value = x.array().colwise() / norms.array();
  return make_result(a.shape(), std::move(value), {a}, [norms](Node& self) {
    Node& in = *self.inputs[0];
    // dx = (g - y <g, y>) / ||x||
    Eigen::VectorXd dot = self.grad.cwiseProduct(self.value).rowwise().sum();
    Matrix gx = self.grad - self.value.cwiseProduct(dot.replicate(1, self.value.cols()));
    gx.array().colwise() /= norms.array();
    in.accumulate(gx);
  });
}

Tensor sum(const Tensor& a) {
  Matrix value = Matrix::Constant(1, 1, a.value().sum());
  return make_result({}, std::move(value), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(Matrix::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  Matrix value = Matrix::Constant(1, 1, a.value().sum() / n);
  return make_result({}, std::move(value), {a}, [n](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(Matrix::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0) / n));
  });
}

Tensor sum_last(const Tensor& a) {
  Matrix value = a.value().rowwise().sum();
  return make_result(rows_by_one(a), std::move(value), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(self.grad.replicate(1, in.value.cols()));
  });
}

Tensor mean_rows(const Tensor& a) {
  const double n = static_cast<double>(a.rows());
  Matrix value = a.value().colwise().sum() / n;
  Shape shape{1, a.cols()};
  return make_result(std::move(shape), std::move(value), {a}, [n](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(self.grad.replicate(in.value.rows(), 1) / n);
  });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  const Index rows = parts.front().value().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat_last: row count mismatch");
    cols += p.value().cols();
  }
  Matrix value(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    value.middleCols(offset, p.value().cols()) = p.value();
    offset += p.value().cols();
  }
  Shape shape{static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(shape), std::move(value), std::move(inputs), [](Node& self) {
    Index off = 0;
    for (auto& in : self.inputs) {
      const Index c = in->value.cols();
      if (in->requires_grad) in->accumulate(self.grad.middleCols(off, c));
      off += c;
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().value().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.value().rows();
  }
  Matrix value(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    value.middleRows(offset, p.value().rows()) = p.value();
    offset += p.value().rows();
  }
  Shape shape{static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)};
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(shape), std::move(value), std::move(inputs), [](Node& self) {
    Index off = 0;
    for (auto& in : self.inputs) {
      const Index r = in->value.rows();
      if (in->requires_grad) in->accumulate(self.grad.middleRows(off, r));
      off += r;
    }
  });
}

Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice_last: invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_to_string(a.shape()));
  }
  const auto b = static_cast<Index>(begin);
  const auto n = static_cast<Index>(end - begin);
  Matrix value = a.value().middleCols(b, n);
  Shape shape = a.shape().empty() ? Shape{1} : a.shape();
  shape.back() = end - begin;
  return make_result(std::move(shape), std::move(value), {a}, [b, n](Node& self) {
    Node& in = *self.inputs[0];
    Matrix g = Matrix::Zero(in.value.rows(), in.value.cols());
    g.middleCols(b, n) = self.grad;
    in.accumulate(g);
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() != 2 || begin >= end || end > a.rows()) {
    throw ShapeError("slice_rows: invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_to_string(a.shape()));
  }
  const auto b = static_cast<Index>(begin);
  const auto n = static_cast<Index>(end - begin);
  Matrix value = a.value().middleRows(b, n);
  Shape shape{end - begin, a.cols()};
  return make_result(std::move(shape), std::move(value), {a}, [b, n](Node& self) {
    Node& in = *self.inputs[0];
    Matrix g = Matrix::Zero(in.value.rows(), in.value.cols());
    g.middleRows(b, n) = self.grad;
    in.accumulate(g);
  });
}

}  // namespace mvd::ndgrad
