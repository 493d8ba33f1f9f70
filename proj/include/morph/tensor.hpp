#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "morph/real.hpp"

MORPH_BEGIN_NAMESPACE

using Shape = std::vector<std::int64_t>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorImpl;

// A recorded operation. `inputs` keeps the operands alive until the graph is
// consumed by backward(); `seq` is the global execution index.
struct Node {
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(std::span<const Real> grad_out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
  }
};

/// Dense row-major tensor with optional participation in the gradient tape.
/// Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(Real v) { return Tensor(Shape{}, std::vector<Real>{v}); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<Real> data() { return impl_->data; }
  std::span<const Real> data() const { return impl_->data; }
  const std::vector<Real>& values() const { return impl_->data; }
  Real item() const;
  Real at(std::int64_t flat) const { return impl_->data.at(static_cast<std::size_t>(flat)); }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<const Real> grad() const { return impl_->grad; }
  std::span<Real> mutable_grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  // Leaf with the same values and no history.
  Tensor detach() const;
  Tensor clone() const;

  bool is_leaf() const { return impl_ && !impl_->grad_fn; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Runs reverse-mode accumulation from a scalar loss. Every reachable node is
/// visited once, in reverse execution order; the recorded graph is released
/// afterwards so the tape is consumed.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds an op result. When any input requires grad (and recording is on),
// attaches a node whose closure maps the output gradient onto the inputs.
// Non-finite output values raise NumericError naming `op`.
Tensor make_result(const char* op, Shape shape, std::vector<Real> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const Real>)> backward_fn);

bool any_requires_grad(std::initializer_list<const Tensor*> ts);

// Gradient buffer of an input, or an empty span when it needs none.
std::span<Real> grad_of(const Tensor& t);

}  // namespace detail

MORPH_END_NAMESPACE
