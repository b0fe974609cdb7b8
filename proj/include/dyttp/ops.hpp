#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dyttp/tensor.hpp"

namespace dyttp {

class Rng;

enum class ElementwiseKind {
  add,
  sub,
  mul,
  div,
  tanh,
  exp,
  log,
  neg,
  abs,
  softplus,
  relu,
  sqrt,
};

enum class ReduceKind { sum, mean, max, argmax };

/// Dispatches to the binary (add/sub/mul/div) or unary kinds. Binary kinds
/// need `b`; unary kinds reject it.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b = nullptr);

// Binary ops broadcast with right-aligned (numpy) rules: dimensions are
// matched from the last axis, and a size-1 dimension stretches.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
/// max(a, lo) elementwise; gradient passes only where a > lo.
Tensor clamp_min(const Tensor& a, double lo);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// [..., m, k] x [..., k, n] -> [..., m, n] with broadcast batch dimensions.
Tensor matmul(const Tensor& a, const Tensor& b);

/// argmax returns indices stored as doubles and is not differentiable.
/// max routes the gradient to the first maximal element of each slice.
Tensor reduce(ReduceKind kind, const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor max(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor argmax(const Tensor& a, std::size_t axis, bool keepdim = false);
/// Sum of every element, as a scalar of shape [].
Tensor sum_all(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
/// Softmax over the last axis where mask[i] == 0 blocks entry i. `mask` has
/// one byte per element of `a`. Throws DomainError when a row is fully blocked.
Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor index_select(const Tensor& a, std::size_t axis, std::span<const std::size_t> indices);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

/// Inverted dropout: zeroes entries with probability p and scales survivors
/// by 1/(1-p). Identity when p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng);

/// Shape that a and b broadcast to; throws ShapeError when incompatible.
Shape broadcast_shape(const Shape& a, const Shape& b);

namespace detail {
/// Picks the fastest build of the kernel the CPU supports.
void tanh_kernel(const double* in, double* out, std::size_t n);
/// Baseline build; every build produces identical bits.
void tanh_kernel_portable(const double* in, double* out, std::size_t n);
}  // namespace detail

}  // namespace dyttp
