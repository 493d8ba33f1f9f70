#include "morph/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

MORPH_BEGIN_NAMESPACE

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_seq{0};

}  // namespace

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(static_cast<std::size_t>(numel_of(shape)), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : impl_(std::make_shared<TensorImpl>()) {
  if (numel_of(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " +
                     std::to_string(values.size()) + " values");
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Real Tensor::item() const {
  if (impl_->data.size() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(impl_->shape));
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Collect every reachable interior tensor.
  // Owning pointers keep queued tensors alive while earlier nodes are released.
  std::vector<std::shared_ptr<TensorImpl>> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::shared_ptr<TensorImpl>> stack{loss.impl()};
  while (!stack.empty()) {
    auto t = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(t.get()).second) continue;
    if (!t->grad_fn) continue;
    for (const auto& in : t->grad_fn->inputs)
      if (in->requires_grad) stack.push_back(in);
    order.push_back(std::move(t));
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a->grad_fn->seq > b->grad_fn->seq; });

  TensorImpl* root = loss.impl().get();
  root->ensure_grad();
  root->grad[0] += Real(1);

  for (auto& t : order) {
    t->ensure_grad();
    auto node = std::move(t->grad_fn);
    node->backward(t->grad);
    // Interior gradients are not kept once propagated.
    if (t.get() != root) std::vector<Real>().swap(t->grad);
    t.reset();
  }
}

namespace detail {

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

std::span<Real> grad_of(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  t.impl()->ensure_grad();
  return t.impl()->grad;
}

Tensor make_result(const char* op, Shape shape, std::vector<Real> data,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const Real>)> backward_fn) {
  for (Real v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Tensor out(std::move(shape), std::move(data));
  bool needs = g_grad_enabled && backward_fn;
  if (needs) {
    needs = false;
    for (const auto& t : inputs) needs = needs || (t.defined() && t.requires_grad());
  }
  if (!needs) return out;
  auto node = std::make_shared<Node>();
  node->seq = g_next_seq.fetch_add(1);
  for (auto& t : inputs)
    if (t.defined()) node->inputs.push_back(t.impl());
  node->backward = std::move(backward_fn);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
  return out;
}

}  // namespace detail

MORPH_END_NAMESPACE
