#include "mvd/ndgrad/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mvd::ndgrad {

namespace {

thread_local Tape* g_current_tape = nullptr;

std::pair<std::size_t, std::size_t> matrix_extents(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  std::size_t cols = shape.back();
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  return {rows, cols};
}

void check_shape(const Shape& shape) {
  for (auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void detail::Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::from_matrix(Matrix value) {
  auto node = std::make_shared<detail::Node>();
  node->shape = {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  check_shape(node->shape);
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, const std::vector<double>& data) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_to_string(shape));
  }
  auto [rows, cols] = matrix_extents(shape);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = Eigen::Map<const Matrix>(data.data(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(cols));
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  check_shape(shape);
  auto [rows, cols] = matrix_extents(shape);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols), value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = from_matrix(std::move(value));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::rows() const { return static_cast<std::size_t>(node_->value.rows()); }
std::size_t Tensor::cols() const { return static_cast<std::size_t>(node_->value.cols()); }
std::size_t Tensor::numel() const { return static_cast<std::size_t>(node_->value.size()); }
const Matrix& Tensor::value() const { return node_->value; }

Matrix& Tensor::mutable_value() {
  if (!is_leaf()) throw std::logic_error("mutable_value() is only allowed on leaf tensors");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  return node_->value(0, 0);
}

std::vector<double> Tensor::data() const {
  const Matrix& v = node_->value;
  return std::vector<double>(v.data(), v.data() + v.size());
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && !node_->backward; }

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

Matrix Gradients::at(const Tensor& param) const {
  auto it = grads_.find(param.id());
  if (it != grads_.end()) return it->second;
  return Matrix::Zero(param.value().rows(), param.value().cols());
}

bool Gradients::contains(const Tensor& param) const { return grads_.count(param.id()) != 0; }

Tape::~Tape() { clear(); }

void Tape::record(const std::shared_ptr<detail::Node>& node) {
  node->on_tape = true;
  nodes_.push_back(node);
}

void Tape::clear() {
  // Break input links so long graphs release without deep recursion.
  for (auto& node : nodes_) {
    node->inputs.clear();
    node->backward = nullptr;
  }
  nodes_.clear();
}

Gradients Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss");
  }
  if (!loss.node()->on_tape) {
    throw std::logic_error("backward(): loss was not recorded on this tape");
  }
  std::unordered_set<detail::Node*> leaves;
  for (auto& node : nodes_) {
    node->grad.resize(0, 0);
    for (auto& in : node->inputs) {
      if (!in->on_tape && in->requires_grad) {
        in->grad.resize(0, 0);
        leaves.insert(in.get());
      }
    }
  }

  auto* loss_node = loss.node().get();
  loss_node->grad = Matrix::Ones(1, 1);
  std::size_t start = nodes_.size();
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].get() == loss_node) {
      start = i;
      break;
    }
  }
  if (start == nodes_.size()) throw std::logic_error("backward(): loss is not on this tape");

  for (std::size_t i = start + 1; i-- > 0;) {
    auto& node = *nodes_[i];
    if (node.grad.size() == 0 || !node.backward) continue;
    node.backward(node);
  }

  Gradients result;
  for (auto* leaf : leaves) {
    if (leaf->grad.size() != 0) {
      result.set(leaf, std::move(leaf->grad));
      leaf->grad.resize(0, 0);
    }
  }
  for (auto& node : nodes_) node->grad.resize(0, 0);
  return result;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) { g_current_tape = nullptr; }
NoGradScope::~NoGradScope() { g_current_tape = previous_; }

Tape* current_tape() { return g_current_tape; }

Gradients backward(const Tensor& loss) {
  if (g_current_tape == nullptr) throw std::logic_error("backward(): no active tape");
  return g_current_tape->backward(loss);
}

Tensor make_result(Shape shape, Matrix value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (!node->value.allFinite()) {
    throw DomainError("non-finite value produced by op with result shape " + shape_to_string(node->shape));
  }
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  Tape* tape = g_current_tape;
  if (needs_grad && tape != nullptr) {
    node->requires_grad = true;
    node->backward = std::move(backward_fn);
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    tape->record(node);
  }
  return Tensor(std::move(node));
}

}  // namespace mvd::ndgrad
