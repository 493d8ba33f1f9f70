#pragma once

// Shared helpers for the unit and acceptance suites: random tensors, a
// central finite-difference gradient checker, and a brute-force bilinear
// sampler used as an independent oracle for grid_sample.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "morph/ops.hpp"

namespace morph_test {

using namespace morph;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Real> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = static_cast<Real>(u(rng));
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(requires_grad);
  return t;
}

// Values bounded away from zero by `gap`, for ops with a kink at 0.
inline Tensor random_away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 0.05) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (auto& x : t.data())
    if (std::abs(x) < gap) x = x < 0 ? -gap - std::abs(x) : gap + x;
  return t;
}

// Reduces any output to a scalar with fixed random weights so every output
// element contributes to the checked gradient.
inline Tensor project(const Tensor& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Tensor w = random_tensor(out.shape(), rng, -1.0, 1.0, false);
  return sum(mul(out, w));
}

struct GradCheckResult {
  double max_rel_error = 0;  // worst over inputs of |analytic - numeric| / max(|analytic|, |numeric|)
  bool all_finite = true;
};

// f must rebuild its output from the current values of `inputs`. Every input
// with requires_grad is checked. Relative error is measured per input on the
// whole gradient vector (2-norms), with an absolute floor for tiny gradients.
inline GradCheckResult gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                                 double h = 1e-6, double floor = 1e-7) {
  for (auto& t : inputs) t.zero_grad();
  const Tensor loss = project(f());
  backward(loss);
  GradCheckResult r;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.values().size(), 0.0);
    if (t.has_grad())
      for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = static_cast<double>(t.grad()[i]);
    double diff2 = 0, a2 = 0, n2 = 0;
    NoGradGuard guard;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const Real saved = t.data()[i];
      t.data()[i] = static_cast<Real>(saved + h);
      const double up = static_cast<double>(project(f()).item());
      t.data()[i] = static_cast<Real>(saved - h);
      const double down = static_cast<double>(project(f()).item());
      t.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) r.all_finite = false;
      diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::sqrt(diff2) / denom);
  }
  return r;
}

// Per-pixel bilinear read with align-corners normalized coordinates and
// clamp-to-border, written independently of the library kernels.
inline double bilinear_read(const std::vector<double>& plane, int h, int w, double gx, double gy) {
  double x = (gx + 1.0) * 0.5 * (w - 1);
  double y = (gy + 1.0) * 0.5 * (h - 1);
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = std::min(int(std::floor(x)), w - 1), y0 = std::min(int(std::floor(y)), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int yy, int xx) { return plane[std::size_t(yy) * w + xx]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline std::vector<double> brute_grid_sample(const Tensor& image, const Tensor& field) {
  const int n = int(image.dim(0)), c = int(image.dim(1)), h = int(image.dim(2)), w = int(image.dim(3));
  std::vector<double> out(std::size_t(n) * c * h * w);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      std::vector<double> plane(std::size_t(h) * w);
      for (int i = 0; i < h * w; ++i) plane[i] = double(image.values()[(std::size_t(b) * c + ch) * h * w + i]);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double gx = double(field.values()[((std::size_t(b) * 2 + 0) * h + y) * w + x]);
          const double gy = double(field.values()[((std::size_t(b) * 2 + 1) * h + y) * w + x]);
          out[((std::size_t(b) * c + ch) * h + y) * w + x] = bilinear_read(plane, h, w, gx, gy);
        }
    }
  return out;
}

inline double max_abs_diff(const std::vector<Real>& a, const std::vector<Real>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace morph_test
