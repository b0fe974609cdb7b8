#include "dyttp/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace dyttp {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (numel_of(shape) != data.size()) {
    throw ShapeError("tensor data has " + std::to_string(data.size()) + " elements but shape " +
                     shape_to_string(shape) + " needs " + std::to_string(numel_of(shape)));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::ones(Shape shape, bool requires_grad) { return full(std::move(shape), 1.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel_of(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != dim()) throw ShapeError("index rank does not match tensor rank");
  std::size_t offset = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl_->shape[axis]) throw ShapeError("index out of range");
    offset = offset * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[offset];
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape::Pause::Pause() : previous_(g_active_tape) { g_active_tape = nullptr; }

Tape::Pause::~Pause() { g_active_tape = previous_; }

void Tape::record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
  output.impl().requires_grad = true;
  entries_.push_back(Entry{std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Tensor& loss, double seed) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    entries_.clear();
    return;
  }
  detail::grad_buffer(loss)[0] += seed;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& out = it->output.impl();
    if (out.grad.empty()) continue;
    it->backward(out.grad);
  }
  entries_.clear();
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

namespace detail {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t != nullptr && t->requires_grad(); });
}

std::vector<double>& grad_buffer(const Tensor& t) {
  auto& impl = t.impl();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

}  // namespace detail
}  // namespace dyttp
