#include "morph/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

MORPH_BEGIN_NAMESPACE

std::size_t ParameterList::count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p.tensor.numel());
  return n;
}

std::uint64_t ParameterList::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : items_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.tensor.values().data());
    const auto len = p.tensor.values().size() * sizeof(Real);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

Tensor gaussian(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
  t.set_requires_grad(requires_grad);
  return t;
}

Conv2d::Conv2d(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride_,
               std::int64_t padding_, double init_std, Rng& rng, bool trainable)
    : weight(gaussian({out, in, kernel, kernel}, init_std, rng, trainable)),
      bias(Tensor::zeros({out}).set_requires_grad(trainable)),
      stride(stride_),
      padding(padding_) {}

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

ConvTranspose2d::ConvTranspose2d(std::int64_t in, std::int64_t out, std::int64_t kernel,
                                 std::int64_t stride_, std::int64_t padding_, double init_std, Rng& rng)
    : weight(gaussian({in, out, kernel, kernel}, init_std, rng, true)),
      bias(Tensor::zeros({out}).set_requires_grad(true)),
      stride(stride_),
      padding(padding_) {}

void ConvTranspose2d::collect(const std::string& prefix, ParameterList& out) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

Linear::Linear(std::int64_t in, std::int64_t out, double init_std, Rng& rng)
    : weight(init_std > 0 ? gaussian({out, in}, init_std, rng, true)
                          : Tensor::zeros({out, in}).set_requires_grad(true)),
      bias(Tensor::zeros({out}).set_requires_grad(true)) {}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

void adam_step(std::span<Real> param, std::span<const Real> grad, AdamMoments& state,
               std::int64_t step, const AdamHyper& hp) {
  if (step < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  if (state.m.size() != param.size()) state.m.assign(param.size(), Real(0));
  if (state.v.size() != param.size()) state.v.assign(param.size(), Real(0));
  const double c1 = 1.0 - std::pow(hp.beta1, double(step));
  const double c2 = 1.0 - std::pow(hp.beta2, double(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : double(grad[i]);
    const double m = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    const double v = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    state.m[i] = static_cast<Real>(m);
    state.v[i] = static_cast<Real>(v);
    param[i] -= static_cast<Real>(hp.lr * (m / c1) / (std::sqrt(v / c2) + hp.eps));
  }
}

Adam::Adam(ParameterList params, AdamHyper hp)
    : params_(std::move(params)), hp_(hp), moments_(params_.size()) {}

void Adam::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_.items()[i].tensor;
    adam_step(p.data(), p.has_grad() ? p.grad() : std::span<const Real>{}, moments_[i], step_, hp_);
  }
}

ParameterList Adam::state_tensors(const std::string& prefix) const {
  ParameterList out;
  out.add(prefix + "step", Tensor({1}, std::vector<Real>{static_cast<Real>(step_)}));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& item = params_.items()[i];
    const auto n = static_cast<std::size_t>(item.tensor.numel());
    auto m = moments_[i].m, v = moments_[i].v;
    m.resize(n, Real(0));
    v.resize(n, Real(0));
    out.add(prefix + item.name + ".m", Tensor(item.tensor.shape(), std::move(m)));
    out.add(prefix + item.name + ".v", Tensor(item.tensor.shape(), std::move(v)));
  }
  return out;
}

void Adam::load_state(const std::vector<NamedTensor>& entries, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& e : entries)
      if (e.name == name) return e.tensor;
    throw std::runtime_error("optimizer state entry missing: " + name);
  };
  step_ = static_cast<std::int64_t>(std::llround(find(prefix + "step").at(0)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& item = params_.items()[i];
    const Tensor& m = find(prefix + item.name + ".m");
    const Tensor& v = find(prefix + item.name + ".v");
    if (m.numel() != item.tensor.numel() || v.numel() != item.tensor.numel())
      throw std::runtime_error("optimizer state size mismatch for " + item.name);
    moments_[i].m = m.values();
    moments_[i].v = v.values();
  }
}

MORPH_END_NAMESPACE
