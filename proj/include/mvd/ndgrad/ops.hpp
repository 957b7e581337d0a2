#pragma once

#include <span>
#include <vector>

#include "mvd/ndgrad/tensor.hpp"

namespace mvd::ndgrad {

// Binary elementwise ops broadcast when one operand is a scalar, a row vector
// [1, n] / [n], or a column vector [m, 1] against an [m, n] operand.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError when any divisor element is zero.
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor exp(const Tensor& a);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor clamp_min(const Tensor& a, double lo);

// Last-axis ops operate on each row of the (flattened) matrix view.

/// Softmax over the last axis, computed with max subtraction.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// Stable log-sum-exp over the last axis -> [rows, 1].
Tensor logsumexp_last(const Tensor& a);
/// Row-wise L2 normalization over the last axis.
Tensor l2_normalize(const Tensor& a, double eps = 1e-12);

/// Sum of all elements -> scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over the last axis -> [rows, 1].
Tensor sum_last(const Tensor& a);
/// Mean over the first (row) axis -> [1, cols].
Tensor mean_rows(const Tensor& a);

Tensor concat_last(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

inline Tensor concat_last(std::initializer_list<Tensor> parts) {
  std::vector<Tensor> v(parts);
  return concat_last(std::span<const Tensor>(v));
}
inline Tensor concat_rows(std::initializer_list<Tensor> parts) {
  std::vector<Tensor> v(parts);
  return concat_rows(std::span<const Tensor>(v));
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }

}  // namespace mvd::ndgrad
