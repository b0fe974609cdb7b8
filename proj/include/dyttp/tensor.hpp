#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dyttp/error.hpp"

namespace dyttp {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major f64 array. A Tensor is a shared handle: copies alias the
/// same storage. Values are fixed after construction; only backward passes
/// (grad) and optimizers (data_mut on parameters) write to an existing one.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> data_mut() { return impl_->data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;
  std::vector<double> to_vector() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; all zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// New leaf with the same values and no tape history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl& impl() const { return *impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Ordered record of differentiable ops executed while the tape is active on
/// this thread. Ops are appended in execution order, which is a topological
/// order of the graph; backward() replays them once, in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);

  /// Propagates d(loss)/d(.) into every requires_grad tensor reachable from
  /// loss, accumulating into existing gradients. `seed` scales the loss
  /// gradient. The tape is emptied afterwards.
  void backward(const Tensor& loss, double seed = 1.0);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  static Tape* active();

  /// Makes `tape` the recording target for the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  /// Suspends recording on the current thread (inference).
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

void backward(const Tensor& loss, Tape& tape);

namespace detail {
/// True when an op on these inputs has to be recorded on the active tape.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
/// Gradient buffer of t, allocated as zeros on first use.
std::vector<double>& grad_buffer(const Tensor& t);
}  // namespace detail

}  // namespace dyttp
