#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace mvd::ndgrad {

/// Row-major dense storage. Every tensor is viewed as (leading extents
/// flattened) x (last extent).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op receives values outside its mathematical domain
/// (log of a non-positive value, division by zero) or produces non-finite output.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
  Shape shape;
  Matrix value;
  Matrix grad;  // empty until backward touches this node
  bool requires_grad = false;
  bool on_tape = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_matrix(Matrix value);
  static Tensor from_data(Shape shape, const std::vector<double>& data);
  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  /// Trainable leaf. Gradients are reported for it by backward().
  static Tensor parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t numel() const;
  const Matrix& value() const;
  /// In-place access for optimizers and checkpoint loading. Only legal on leaves.
  Matrix& mutable_value();
  double item() const;
  std::vector<double> data() const;
  bool requires_grad() const;
  bool is_leaf() const;

  /// A constant copy cut off from the graph.
  Tensor detach() const;

  const detail::Node* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, Matrix, std::vector<Tensor>, std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

/// Gradients of one backward pass, keyed by leaf parameter.
class Gradients {
 public:
  /// Gradient for `param`; a zero tensor of the same shape if it was unreachable.
  Matrix at(const Tensor& param) const;
  bool contains(const Tensor& param) const;
  std::size_t size() const { return grads_.size(); }

  void set(const detail::Node* key, Matrix g) { grads_[key] = std::move(g); }

 private:
  std::unordered_map<const detail::Node*, Matrix> grads_;
};

/// Ordered record of the ops executed while it is active. Recording order is a
/// topological order, so replaying it backwards visits nodes after all their
/// consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  void record(const std::shared_ptr<detail::Node>& node);
  std::size_t size() const { return nodes_.size(); }
  void clear();

  Gradients backward(const Tensor& loss);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Makes `tape` the recording tape of the calling thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording (inference) for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* current_tape();

/// Backward over the thread's active tape.
Gradients backward(const Tensor& loss);

/// Builds an op result. Recorded on the active tape when any input requires
/// gradients; `backward_fn` then receives the result node with its grad set.
Tensor make_result(Shape shape, Matrix value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

}  // namespace mvd::ndgrad
