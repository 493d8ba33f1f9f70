#pragma once

#include <random>
#include <string>
#include <vector>

#include "morph/ops.hpp"

MORPH_BEGIN_NAMESPACE

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered list of named parameters. Order is stable and defines checkpoint
/// layout.
class ParameterList {
 public:
  void add(std::string name, Tensor t) { items_.push_back({std::move(name), std::move(t)}); }
  void append(const std::string& prefix, const ParameterList& other) {
    for (const auto& p : other.items_) add(prefix + p.name, p.tensor);
  }
  const std::vector<NamedTensor>& items() const& { return items_; }
  std::vector<NamedTensor> items() && { return std::move(items_); }
  std::size_t size() const { return items_.size(); }
  void zero_grad() const {
    for (const auto& p : items_) Tensor(p.tensor).zero_grad();
  }
  std::size_t count() const;
  // FNV-1a over the raw bytes of every value; used to detect updates.
  std::uint64_t hash() const;

 private:
  std::vector<NamedTensor> items_;
};

Tensor gaussian(Shape shape, double stddev, Rng& rng, bool requires_grad);

struct Conv2d {
  Tensor weight, bias;
  std::int64_t stride = 1, padding = 0;

  Conv2d() = default;
  Conv2d(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride,
         std::int64_t padding, double init_std, Rng& rng, bool trainable = true);
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct ConvTranspose2d {
  Tensor weight, bias;
  std::int64_t stride = 1, padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t stride,
                  std::int64_t padding, double init_std, Rng& rng);
  Tensor operator()(const Tensor& x) const { return conv_transpose2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct Linear {
  Tensor weight, bias;

  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, double init_std, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<Real> m, v;
};

// One bias-corrected Adam update of a single parameter buffer. `step` is the
// 1-based index of this update.
void adam_step(std::span<Real> param, std::span<const Real> grad, AdamMoments& state,
               std::int64_t step, const AdamHyper& hp);

class Adam {
 public:
  Adam() = default;
  Adam(ParameterList params, AdamHyper hp);

  // Applies one update using the gradients currently held by the parameters;
  // parameters without a gradient are treated as having zero gradient.
  void step();
  std::int64_t steps() const { return step_; }
  const ParameterList& params() const { return params_; }
  const AdamHyper& hyper() const { return hp_; }

  // Moments and step counter, for checkpointing.
  ParameterList state_tensors(const std::string& prefix) const;
  void load_state(const std::vector<NamedTensor>& entries, const std::string& prefix);

 private:
  ParameterList params_;
  AdamHyper hp_;
  std::vector<AdamMoments> moments_;
  std::int64_t step_ = 0;
};

MORPH_END_NAMESPACE
