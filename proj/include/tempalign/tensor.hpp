#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tempalign/errors.hpp"

namespace tempalign {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense f64 tensor with a gradient slot. Copies share storage; all model
// parameters and intermediate values are Tensors.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    for (int d : shape)
      if (d <= 0) throw DimensionError("zeros: non-positive dimension in " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw DimensionError("from: " + std::to_string(values.size()) +
                           " values do not fill shape " + shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::size_t numel() const { return impl_->data.size(); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  int rows() const { return impl_->shape.at(0); }
  int cols() const { return impl_->shape.at(1); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  // Gradient buffer; allocated (zero-filled) on first access.
  std::vector<double>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  double value() const {
    if (numel() != 1) throw ContractError("value: tensor of shape " + shape_str(shape()) + " is not scalar");
    return impl_->data[0];
  }

  double at(int r, int c) const { return impl_->data[static_cast<std::size_t>(r) * cols() + c]; }
  double& at(int r, int c) { return impl_->data[static_cast<std::size_t>(r) * cols() + c]; }

  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> impl_ptr() const { return impl_; }

  // Deep copy with detached storage (gradient not copied).
  Tensor clone() const {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
  }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Records one backward rule per forward operation, in execution order.
// Constructing a Tape makes it the active tape for the current thread; ops
// executed while it is active record themselves. backward() replays the
// rules in exact reverse order, accumulating into .grad additively, then
// clears the tape. With no active tape the ops run forward-only.
class Tape {
 public:
  Tape() : previous_(current_) { current_ = this; }
  ~Tape() { current_ = previous_; }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return current_; }

  void record(std::function<void()> backward_rule) {
    entries_.push_back(std::move(backward_rule));
  }

  std::size_t size() const { return entries_.size(); }

  void backward(Tensor loss) {
    if (loss.numel() != 1)
      throw ContractError("backward: loss has shape " + shape_str(loss.shape()) + ", expected scalar");
    if (entries_.empty()) throw ContractError("backward: tape is empty");
    loss.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
  }

 private:
  static inline thread_local Tape* current_ = nullptr;
  std::vector<std::function<void()>> entries_;
  Tape* previous_;
};

}  // namespace tempalign
