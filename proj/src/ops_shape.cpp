#include <numeric>

#include "dyttp/ops.hpp"

namespace dyttp {

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + shape_to_string(a.shape()) + " to " + shape_to_string(shape));
  }
  Tensor result(std::move(shape), a.to_vector());
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return result;
}

Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1) {
  const auto rank = a.dim();
  if (axis0 >= rank || axis1 >= rank) {
    throw ShapeError("transpose axes out of range for shape " + shape_to_string(a.shape()));
  }
  if (axis0 == axis1) return a;
  if (axis0 > axis1) std::swap(axis0, axis1);
  const auto& in = a.shape();
  // [outer, d0, mid, d1, inner] -> [outer, d1, mid, d0, inner]
  std::size_t outer = 1, mid = 1, inner = 1;
  for (std::size_t i = 0; i < axis0; ++i) outer *= in[i];
  for (std::size_t i = axis0 + 1; i < axis1; ++i) mid *= in[i];
  for (std::size_t i = axis1 + 1; i < rank; ++i) inner *= in[i];
  const std::size_t d0 = in[axis0];
  const std::size_t d1 = in[axis1];

  // perm[out_flat] = in_flat
  auto perm = std::make_shared<std::vector<std::size_t>>(a.numel());
  std::size_t flat = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < d1; ++j)
      for (std::size_t m = 0; m < mid; ++m)
        for (std::size_t i = 0; i < d0; ++i)
          for (std::size_t r = 0; r < inner; ++r)
            (*perm)[flat++] = (((o * d0 + i) * mid + m) * d1 + j) * inner + r;

  Shape out_shape = in;
  std::swap(out_shape[axis0], out_shape[axis1]);
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = x[(*perm)[f]];
  Tensor result(std::move(out_shape), std::move(out));
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a, perm](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      for (std::size_t f = 0; f < g.size(); ++f) ga[(*perm)[f]] += g[f];
    });
  }
  return result;
}

Tensor index_select(const Tensor& a, std::size_t axis, std::span<const std::size_t> indices) {
  if (axis >= a.dim()) throw ShapeError("index_select axis out of range for " + shape_to_string(a.shape()));
  const auto& in = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[axis];
  for (auto idx : indices) {
    if (idx >= len) throw ShapeError("index " + std::to_string(idx) + " out of range for axis of size " + std::to_string(len));
  }
  std::vector<std::size_t> picks(indices.begin(), indices.end());
  Shape out_shape = in;
  out_shape[axis] = picks.size();
  const auto x = a.data();
  std::vector<double> out(outer * picks.size() * inner);
  std::size_t f = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (auto p : picks)
      for (std::size_t r = 0; r < inner; ++r) out[f++] = x[(o * len + p) * inner + r];
  Tensor result(std::move(out_shape), std::move(out));
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a, picks = std::move(picks), outer, inner, len](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      std::size_t f = 0;
      for (std::size_t o = 0; o < outer; ++o)
        for (auto p : picks)
          for (std::size_t r = 0; r < inner; ++r) ga[(o * len + p) * inner + r] += g[f++];
    });
  }
  return result;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= a.dim() || start + length > a.shape()[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) + ") out of range for " +
                     shape_to_string(a.shape()));
  }
  std::vector<std::size_t> idx(length);
  std::iota(idx.begin(), idx.end(), start);
  return index_select(a, axis, idx);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::size_t total = 0;
  std::vector<std::size_t> lengths;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw ShapeError("concat shape mismatch: " + shape_to_string(first) + " vs " + shape_to_string(s));
    lengths.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].data();
    const std::size_t len = lengths[k];
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t r = 0; r < inner; ++r) out[(o * total + offset + l) * inner + r] = x[(o * len + l) * inner + r];
    offset += len;
  }
  Tensor result(std::move(out_shape), std::move(out));
  bool any = false;
  for (const auto& p : parts) any = any || detail::needs_grad({&p});
  if (any) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    Tape::active()->record(inputs, result, [inputs, lengths, outer, inner, total](std::span<const double> g) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::size_t len = lengths[k];
        if (inputs[k].requires_grad()) {
          auto& gk = detail::grad_buffer(inputs[k]);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t l = 0; l < len; ++l)
              for (std::size_t r = 0; r < inner; ++r) gk[(o * len + l) * inner + r] += g[(o * total + offset + l) * inner + r];
        }
        offset += len;
      }
    });
  }
  return result;
}

}  // namespace dyttp
