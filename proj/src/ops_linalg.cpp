#include <algorithm>

#include "dyttp/ops.hpp"

namespace dyttp {
namespace {

// For each flat index over `out` batch dims, the flat batch index into an
// operand whose batch shape `in` broadcasts to `out`.
std::vector<std::size_t> batch_table(const Shape& in, const Shape& out) {
  const auto rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t axis = rank - 1 - i;
    const std::size_t d = i < in.size() ? in[in.size() - 1 - i] : 1;
    stride[axis] = d == 1 ? 0 : s;
    s *= d;
  }
  const auto n = numel_of(out);
  std::vector<std::size_t> table(n);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t offset = 0;
    for (std::size_t axis = 0; axis < rank; ++axis) offset += counter[axis] * stride[axis];
    table[flat] = offset;
    for (std::size_t axis = rank; axis-- > 0;) {
      if (++counter[axis] < out[axis]) break;
      counter[axis] = 0;
    }
  }
  return table;
}

// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// ga[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(const double* g, const double* b, double* ga, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* gai = ga + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      gai[p] += acc;
    }
  }
}

// gb[k,n] += a[m,k]^T * g[m,n]
void gemm_tn(const double* a, const double* g, double* gb, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* gbp = gb + p * n;
      for (std::size_t j = 0; j < n; ++j) gbp[j] += av * gi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() < 2 || b.dim() < 2) {
    throw ShapeError("matmul needs operands of rank >= 2, got " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[a.dim() - 2];
  const std::size_t k = a.shape()[a.dim() - 1];
  const std::size_t kb = b.shape()[b.dim() - 2];
  const std::size_t n = b.shape()[b.dim() - 1];
  if (k != kb) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  const Shape out_batch = broadcast_shape(a_batch, b_batch);
  const auto batches = numel_of(out_batch);
  const auto ta = batch_table(a_batch, out_batch);
  const auto tb = batch_table(b_batch, out_batch);

  Shape out_shape = out_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batches * m * n, 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    gemm_nn(ad.data() + ta[bi] * m * k, bd.data() + tb[bi] * k * n, out.data() + bi * m * n, m, k, n);
  }

  Tensor result(std::move(out_shape), std::move(out));
  if (detail::needs_grad({&a, &b})) {
    Tape::active()->record({a, b}, result, [a, b, ta, tb, m, k, n](std::span<const double> g) {
      const auto batches = ta.size();
      if (a.requires_grad()) {
        auto& ga = detail::grad_buffer(a);
        const auto bd = b.data();
        for (std::size_t bi = 0; bi < batches; ++bi) {
          gemm_nt(g.data() + bi * m * n, bd.data() + tb[bi] * k * n, ga.data() + ta[bi] * m * k, m, k, n);
        }
      }
      if (b.requires_grad()) {
        auto& gb = detail::grad_buffer(b);
        const auto ad = a.data();
        for (std::size_t bi = 0; bi < batches; ++bi) {
          gemm_tn(ad.data() + ta[bi] * m * k, g.data() + bi * m * n, gb.data() + tb[bi] * k * n, m, k, n);
        }
      }
    });
  }
  return result;
}

}  // namespace dyttp
