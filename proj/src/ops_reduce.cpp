#include <cmath>
#include <limits>

#include "dyttp/ops.hpp"

namespace dyttp {
namespace {

// View of a tensor as [outer, length, inner] around `axis`.
struct AxisView {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisView view_around(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + shape_to_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape reduced_shape(const Shape& shape, std::size_t axis, bool keepdim) {
  Shape out = shape;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

}  // namespace

Tensor reduce(ReduceKind kind, const Tensor& a, std::size_t axis, bool keepdim) {
  const auto v = view_around(a.shape(), axis);
  if (v.length == 0 && (kind == ReduceKind::max || kind == ReduceKind::argmax || kind == ReduceKind::mean)) {
    throw ShapeError("cannot take max/argmax/mean over an empty axis");
  }
  const auto x = a.data();
  std::vector<double> out(v.outer * v.inner, 0.0);
  // Index (within the axis) of the winning element, for max backward.
  std::vector<std::size_t> winner;
  if (kind == ReduceKind::max || kind == ReduceKind::argmax) winner.assign(out.size(), 0);

  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.length * v.inner + i;
      const std::size_t slot = o * v.inner + i;
      switch (kind) {
        case ReduceKind::sum:
        case ReduceKind::mean: {
          double acc = 0.0;
          for (std::size_t l = 0; l < v.length; ++l) acc += x[base + l * v.inner];
          out[slot] = kind == ReduceKind::mean ? acc / static_cast<double>(v.length) : acc;
          break;
        }
        case ReduceKind::max:
        case ReduceKind::argmax: {
          std::size_t best = 0;
          double best_value = x[base];
          for (std::size_t l = 1; l < v.length; ++l) {
            const double value = x[base + l * v.inner];
            if (value > best_value) {
              best_value = value;
              best = l;
            }
          }
          winner[slot] = best;
          out[slot] = kind == ReduceKind::max ? best_value : static_cast<double>(best);
          break;
        }
      }
    }
  }

  Tensor result(reduced_shape(a.shape(), axis, keepdim), std::move(out));
  if (kind != ReduceKind::argmax && detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a, v, kind, winner = std::move(winner)](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      const double mean_scale = 1.0 / static_cast<double>(v.length);
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.length * v.inner + i;
          const std::size_t slot = o * v.inner + i;
          if (kind == ReduceKind::max) {
            ga[base + winner[slot] * v.inner] += g[slot];
          } else {
            const double gv = kind == ReduceKind::mean ? g[slot] * mean_scale : g[slot];
            for (std::size_t l = 0; l < v.length; ++l) ga[base + l * v.inner] += gv;
          }
        }
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) { return reduce(ReduceKind::sum, a, axis, keepdim); }
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) { return reduce(ReduceKind::mean, a, axis, keepdim); }
Tensor max(const Tensor& a, std::size_t axis, bool keepdim) { return reduce(ReduceKind::max, a, axis, keepdim); }
Tensor argmax(const Tensor& a, std::size_t axis, bool keepdim) { return reduce(ReduceKind::argmax, a, axis, keepdim); }

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (auto x : a.data()) acc += x;
  Tensor result = Tensor::scalar(acc);
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      for (auto& v : ga) v += g[0];
    });
  }
  return result;
}

namespace {

// Softmax over slices described by `v`; entries with keep[idx] == 0 get
// probability exactly 0 (keep may be empty = keep everything).
Tensor softmax_impl(const Tensor& a, const AxisView& v, std::span<const std::uint8_t> keep) {
  const auto x = a.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.length * v.inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t l = 0; l < v.length; ++l) {
        const std::size_t idx = base + l * v.inner;
        if (!keep.empty() && !keep[idx]) continue;
        any = true;
        if (x[idx] > peak) peak = x[idx];
      }
      if (!any) throw DomainError("softmax row has no attendable entry");
      double total = 0.0;
      for (std::size_t l = 0; l < v.length; ++l) {
        const std::size_t idx = base + l * v.inner;
        if (!keep.empty() && !keep[idx]) continue;
        out[idx] = std::exp(x[idx] - peak);
        total += out[idx];
      }
      for (std::size_t l = 0; l < v.length; ++l) out[base + l * v.inner] /= total;
    }
  }
  Tensor result(a.shape(), std::move(out));
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a, result, v](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      const auto y = result.data();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.length * v.inner + i;
          double dot = 0.0;
          for (std::size_t l = 0; l < v.length; ++l) dot += g[base + l * v.inner] * y[base + l * v.inner];
          for (std::size_t l = 0; l < v.length; ++l) {
            const std::size_t idx = base + l * v.inner;
            ga[idx] += y[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor softmax(const Tensor& a, std::size_t axis) { return softmax_impl(a, view_around(a.shape(), axis), {}); }

Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask) {
  if (a.dim() == 0) throw ShapeError("masked_softmax needs rank >= 1");
  if (mask.size() != a.numel()) {
    throw ShapeError("mask has " + std::to_string(mask.size()) + " entries for tensor of shape " +
                     shape_to_string(a.shape()));
  }
  return softmax_impl(a, view_around(a.shape(), a.dim() - 1), mask);
}

}  // namespace dyttp
