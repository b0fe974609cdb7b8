#include <algorithm>
#include <cmath>
#include <type_traits>

#include "dyttp/ops.hpp"
#include "dyttp/rng.hpp"

namespace dyttp {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const auto rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_to_string(a) + " with " + shape_to_string(b));
    }
    out[rank - 1 - i] = da == 1 ? db : da;
  }
  return out;
}

namespace {

// How one input of a broadcast binary op is laid out against the output,
// viewed as rows of the output's last dimension: each row starts at
// `offset(r)` in the input and advances by `step` (0 or 1) per element.
class RowLayout {
 public:
  RowLayout(const Shape& in, const Shape& out) {
    const auto rank = out.size();
    last_ = rank == 0 ? 1 : out.back();
    const auto rows = last_ == 0 ? 0 : numel_of(out) / last_;
    if (numel_of(in) == numel_of(out)) {
      step_ = 1;
      contiguous_ = true;
      return;
    }
    std::vector<std::size_t> in_stride(rank, 0);
    std::size_t stride = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      const std::size_t axis = rank - 1 - i;
      const std::size_t d = i < in.size() ? in[in.size() - 1 - i] : 1;
      in_stride[axis] = d == 1 ? 0 : stride;
      stride *= d;
    }
    step_ = rank == 0 ? 0 : in_stride[rank - 1];
    offsets_.resize(rows);
    if (rank < 2) return;
    std::vector<std::size_t> counter(rank - 1, 0);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      offsets_[r] = offset;
      for (std::size_t axis = rank - 1; axis-- > 0;) {
        ++counter[axis];
        offset += in_stride[axis];
        if (counter[axis] < out[axis]) break;
        offset -= in_stride[axis] * counter[axis];
        counter[axis] = 0;
      }
    }
  }

  bool contiguous() const { return contiguous_; }
  std::size_t step() const { return step_; }
  std::size_t offset(std::size_t row) const { return contiguous_ ? row * last_ : offsets_[row]; }

 private:
  std::size_t last_ = 1;
  std::size_t step_ = 1;
  bool contiguous_ = false;
  std::vector<std::size_t> offsets_;
};

using Unit = std::integral_constant<std::size_t, 1>;
using Zero = std::integral_constant<std::size_t, 0>;

/// Calls body(row_out, pa, pb, len, SA, SB) for every output row with the
/// input strides as compile-time constants, so the inner loops vectorize.
template <typename Body>
void for_each_row(const RowLayout& la, const RowLayout& lb, std::size_t n, std::size_t last, Body&& body) {
  if (la.contiguous() && lb.contiguous()) {
    body(std::size_t{0}, std::size_t{0}, std::size_t{0}, n, Unit{}, Unit{});
    return;
  }
  const std::size_t rows = last == 0 ? 0 : n / last;
  auto loop = [&](auto sa, auto sb) {
    for (std::size_t r = 0; r < rows; ++r) body(r * last, la.offset(r), lb.offset(r), last, sa, sb);
  };
  if (la.step() == 1 && lb.step() == 1) {
    loop(Unit{}, Unit{});
  } else if (la.step() == 1) {
    loop(Unit{}, Zero{});
  } else if (lb.step() == 1) {
    loop(Zero{}, Unit{});
  } else {
    loop(Zero{}, Zero{});
  }
}

enum class BinaryKind { add, sub, mul, div };

template <typename F>
void apply_binary(const RowLayout& la, const RowLayout& lb, std::size_t last, const double* ad, const double* bd,
                  std::span<double> out, F f) {
  for_each_row(la, lb, out.size(), last, [&](std::size_t o, std::size_t ia, std::size_t ib, std::size_t len, auto sa,
                                             auto sb) {
    const double* pa = ad + ia;
    const double* pb = bd + ib;
    double* po = out.data() + o;
    for (std::size_t j = 0; j < len; ++j) po[j] = f(pa[j * sa], pb[j * sb]);
  });
}

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto n = numel_of(out_shape);
  const std::size_t last = out_shape.empty() ? 1 : out_shape.back();
  auto la = std::make_shared<RowLayout>(a.shape(), out_shape);
  auto lb = std::make_shared<RowLayout>(b.shape(), out_shape);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(n);

  if (kind == BinaryKind::div) {
    for (std::size_t i = 0; i < bd.size(); ++i) {
      if (bd[i] == 0.0) throw DomainError("division by zero in div");
    }
  }

  switch (kind) {
    case BinaryKind::add:
      apply_binary(*la, *lb, last, ad.data(), bd.data(), out, [](double x, double y) { return x + y; });
      break;
    case BinaryKind::sub:
      apply_binary(*la, *lb, last, ad.data(), bd.data(), out, [](double x, double y) { return x - y; });
      break;
    case BinaryKind::mul:
      apply_binary(*la, *lb, last, ad.data(), bd.data(), out, [](double x, double y) { return x * y; });
      break;
    case BinaryKind::div:
      apply_binary(*la, *lb, last, ad.data(), bd.data(), out, [](double x, double y) { return x / y; });
      break;
  }

  Tensor result(std::move(out_shape), std::move(out));
  if (detail::needs_grad({&a, &b})) {
    Tape::active()->record({a, b}, result, [a, b, la, lb, kind, last](std::span<const double> g) {
      const double* ad = a.data().data();
      const double* bd = b.data().data();
      const double* gd = g.data();
      if (a.requires_grad()) {
        double* ga = detail::grad_buffer(a).data();
        for_each_row(*la, *lb, g.size(), last, [&](std::size_t o, std::size_t ia, std::size_t ib, std::size_t len,
                                                   auto sa, auto sb) {
          double* pga = ga + ia;
          const double* pb = bd + ib;
          const double* pg = gd + o;
          for (std::size_t j = 0; j < len; ++j) {
            switch (kind) {
              case BinaryKind::add:
              case BinaryKind::sub:
                pga[j * sa] += pg[j];
                break;
              case BinaryKind::mul:
                pga[j * sa] += pg[j] * pb[j * sb];
                break;
              case BinaryKind::div:
                pga[j * sa] += pg[j] / pb[j * sb];
                break;
            }
          }
        });
      }
      if (b.requires_grad()) {
        double* gb = detail::grad_buffer(b).data();
        for_each_row(*la, *lb, g.size(), last, [&](std::size_t o, std::size_t ia, std::size_t ib, std::size_t len,
                                                   auto sa, auto sb) {
          double* pgb = gb + ib;
          const double* pa = ad + ia;
          const double* pb = bd + ib;
          const double* pg = gd + o;
          for (std::size_t j = 0; j < len; ++j) {
            switch (kind) {
              case BinaryKind::add:
                pgb[j * sb] += pg[j];
                break;
              case BinaryKind::sub:
                pgb[j * sb] -= pg[j];
                break;
              case BinaryKind::mul:
                pgb[j * sb] += pg[j] * pa[j * sa];
                break;
              case BinaryKind::div:
                pgb[j * sb] -= pg[j] * pa[j * sa] / (pb[j * sb] * pb[j * sb]);
                break;
            }
          }
        });
      }
    });
  }
  return result;
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unary op: forward fills out from in; `deriv(x, y)` is dy/dx given input x
// and output y.
template <typename Forward, typename Deriv>
Tensor unary(const Tensor& a, Forward forward, Deriv deriv) {
  std::vector<double> out(a.numel());
  forward(a.data(), std::span<double>(out));
  Tensor result(a.shape(), std::move(out));
  if (detail::needs_grad({&a})) {
    Tape::active()->record({a}, result, [a, result, deriv](std::span<const double> g) {
      auto& ga = detail::grad_buffer(a);
      const auto x = a.data();
      const auto y = result.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
    });
  }
  return result;
}

template <typename F>
auto pointwise(F f) {
  return [f](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  };
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(BinaryKind::div, a, b); }

Tensor neg(const Tensor& a) {
  return unary(a, pointwise([](double x) { return -x; }), [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary(a, pointwise([](double x) { return std::exp(x); }), [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (auto v : a.data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, pointwise([](double x) { return std::log(x); }), [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](std::span<const double> in, std::span<double> out) { detail::tanh_kernel(in.data(), out.data(), in.size()); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& a) {
  return unary(a, pointwise([](double x) { return std::fabs(x); }),
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor softplus(const Tensor& a) {
  return unary(a, pointwise(stable_softplus), [](double x, double) { return sigmoid(x); });
}

Tensor relu(const Tensor& a) {
  return unary(a, pointwise([](double x) { return x > 0.0 ? x : 0.0; }),
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sqrt(const Tensor& a) {
  for (auto v : a.data()) {
    if (!(v > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(v));
  }
  return unary(a, pointwise([](double x) { return std::sqrt(x); }), [](double, double y) { return 0.5 / y; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, pointwise([factor](double x) { return x * factor; }), [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, pointwise([value](double x) { return x + value; }), [](double, double) { return 1.0; });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return unary(a, pointwise([lo](double x) { return x > lo ? x : lo; }),
               [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b) {
  const bool binary_kind = kind == ElementwiseKind::add || kind == ElementwiseKind::sub ||
                           kind == ElementwiseKind::mul || kind == ElementwiseKind::div;
  if (binary_kind && b == nullptr) throw ShapeError("binary elementwise op needs a second operand");
  if (!binary_kind && b != nullptr) throw ShapeError("unary elementwise op given a second operand");
  switch (kind) {
    case ElementwiseKind::add:
      return add(a, *b);
    case ElementwiseKind::sub:
      return sub(a, *b);
    case ElementwiseKind::mul:
      return mul(a, *b);
    case ElementwiseKind::div:
      return div(a, *b);
    case ElementwiseKind::tanh:
      return tanh(a);
    case ElementwiseKind::exp:
      return exp(a);
    case ElementwiseKind::log:
      return log(a);
    case ElementwiseKind::neg:
      return neg(a);
    case ElementwiseKind::abs:
      return abs(a);
    case ElementwiseKind::softplus:
      return softplus(a);
    case ElementwiseKind::relu:
      return relu(a);
    case ElementwiseKind::sqrt:
      return sqrt(a);
  }
  throw ShapeError("unknown elementwise kind");
}

Tensor dropout(const Tensor& a, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw DomainError("dropout probability must be in [0, 1)");
  if (p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> factors(a.numel());
  for (auto& f : factors) f = rng.uniform() < p ? 0.0 : keep_scale;
  return mul(a, Tensor(a.shape(), std::move(factors)));
}

}  // namespace dyttp
