#include "morph/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "morph/kernels.hpp"

MORPH_BEGIN_NAMESPACE

using detail::grad_of;
using detail::make_result;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.ndim() != rank)
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <class F, class G>
Tensor unary(const char* op, const Tensor& x, F f, G df) {
  std::vector<Real> out(x.values().size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [x, df](std::span<const Real> g) {
    auto gx = grad_of(x);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * df(xv[i]);
  });
}

kernels::ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::int64_t stride,
                                    std::int64_t padding, const char* op) {
  require_rank(input, 4, op, "input");
  require_rank(kernel, 4, op, "kernel");
  if (input.dim(1) != kernel.dim(1))
    throw ShapeError(std::string(op) + ": input channel dimension (dim 1) is " +
                     std::to_string(input.dim(1)) + " but kernel expects " +
                     std::to_string(kernel.dim(1)));
  if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
  if (padding < 0) throw ShapeError(std::string(op) + ": padding must be >= 0");
  if (kernel.dim(2) > input.dim(2) + 2 * padding)
    throw ShapeError(std::string(op) + ": kernel height " + std::to_string(kernel.dim(2)) +
                     " exceeds padded input height " + std::to_string(input.dim(2) + 2 * padding));
  if (kernel.dim(3) > input.dim(3) + 2 * padding)
    throw ShapeError(std::string(op) + ": kernel width " + std::to_string(kernel.dim(3)) +
                     " exceeds padded input width " + std::to_string(input.dim(3) + 2 * padding));
  kernels::ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_channels = kernel.dim(0);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  return g;
}

void check_bias(const Tensor& bias, std::int64_t channels, const char* op) {
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != channels))
    throw ShapeError(std::string(op) + ": bias must have shape [" + std::to_string(channels) +
                     "], got " + shape_str(bias.shape()));
}

void add_bias_grad(std::span<Real> gb, std::span<const Real> g, std::int64_t n, std::int64_t c,
                   std::int64_t plane) {
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t k = 0; k < c; ++k) {
      const Real* src = g.data() + (b * c + k) * plane;
      Real acc = 0;
      for (std::int64_t p = 0; p < plane; ++p) acc += src[p];
      gb[k] += acc;
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::int64_t stride,
              std::int64_t padding) {
  const auto g = conv_geometry(input, kernel, stride, padding, "conv2d");
  check_bias(bias, g.out_channels, "conv2d");
  Shape shape{g.batch, g.out_channels, g.out_h(), g.out_w()};
  std::vector<Real> out(static_cast<std::size_t>(numel_of(shape)));
  kernels::conv2d_forward(g, input.data(), kernel.data(),
                          bias.defined() ? bias.data() : std::span<const Real>{}, out);
  return make_result("conv2d", shape, std::move(out), {input, kernel, bias},
                     [g, input, kernel, bias](std::span<const Real> go) {
                       if (auto gi = grad_of(input); !gi.empty())
                         kernels::conv2d_backward_input(g, go, kernel.data(), gi);
                       if (auto gk = grad_of(kernel); !gk.empty())
                         kernels::conv2d_backward_weight(g, input.data(), go, gk);
                       if (auto gb = grad_of(bias); !gb.empty())
                         add_bias_grad(gb, go, g.batch, g.out_channels, g.out_h() * g.out_w());
                     });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        std::int64_t stride, std::int64_t padding) {
  require_rank(input, 4, "conv_transpose2d", "input");
  require_rank(kernel, 4, "conv_transpose2d", "kernel");
  if (input.dim(1) != kernel.dim(0))
    throw ShapeError("conv_transpose2d: input channel dimension (dim 1) is " +
                     std::to_string(input.dim(1)) + " but kernel expects " +
                     std::to_string(kernel.dim(0)));
  if (stride < 1 || padding < 0) throw ShapeError("conv_transpose2d: invalid stride/padding");
  // Geometry of the conv2d whose input-adjoint this is.
  kernels::ConvGeometry g;
  g.batch = input.dim(0);
  g.out_channels = kernel.dim(0);
  g.in_channels = kernel.dim(1);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  g.in_h = (input.dim(2) - 1) * stride - 2 * padding + g.kernel_h;
  g.in_w = (input.dim(3) - 1) * stride - 2 * padding + g.kernel_w;
  if (g.in_h < 1 || g.in_w < 1)
    throw ShapeError("conv_transpose2d: non-positive output size for input " + shape_str(input.shape()));
  if (g.out_h() != input.dim(2) || g.out_w() != input.dim(3))
    throw ShapeError("conv_transpose2d: inconsistent geometry for input " + shape_str(input.shape()));
  check_bias(bias, g.in_channels, "conv_transpose2d");
  Shape shape{g.batch, g.in_channels, g.in_h, g.in_w};
  std::vector<Real> out(static_cast<std::size_t>(numel_of(shape)), Real(0));
  kernels::conv2d_backward_input(g, input.data(), kernel.data(), out);
  if (bias.defined()) {
    const auto plane = g.in_h * g.in_w;
    for (std::int64_t b = 0; b < g.batch; ++b)
      for (std::int64_t c = 0; c < g.in_channels; ++c)
        for (std::int64_t p = 0; p < plane; ++p) out[(b * g.in_channels + c) * plane + p] += bias.at(c);
  }
  return make_result("conv_transpose2d", shape, std::move(out), {input, kernel, bias},
                     [g, input, kernel, bias](std::span<const Real> go) {
                       if (auto gi = grad_of(input); !gi.empty()) {
                         std::vector<Real> tmp(gi.size());
                         kernels::conv2d_forward(g, go, kernel.data(), {}, tmp);
                         for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += tmp[i];
                       }
                       if (auto gk = grad_of(kernel); !gk.empty())
                         kernels::conv2d_backward_weight(g, go, input.data(), gk);
                       if (auto gb = grad_of(bias); !gb.empty())
                         add_bias_grad(gb, go, g.batch, g.in_channels, g.in_h * g.in_w);
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  if (x.dim(1) != weight.dim(1))
    throw ShapeError("linear: input features (dim 1) " + std::to_string(x.dim(1)) +
                     " but weight expects " + std::to_string(weight.dim(1)));
  check_bias(bias, weight.dim(0), "linear");
  // A 1x1 convolution over a 1x1 plane.
  const auto n = x.dim(0), in = x.dim(1), outf = weight.dim(0);
  Tensor x4 = reshape(x, {n, in, 1, 1});
  Tensor w4 = reshape(weight, {outf, in, 1, 1});
  return reshape(conv2d(x4, w4, bias, 1, 0), {n, outf});
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](Real v) { return v > 0 ? v : Real(0); },
      [](Real v) { return v > 0 ? Real(1) : Real(0); });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x, [](Real v) { return Real(1) / (Real(1) + std::exp(-v)); },
      [](Real v) {
        const Real s = Real(1) / (Real(1) + std::exp(-v));
        return s * (1 - s);
      });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](Real v) { return std::tanh(v); },
      [](Real v) {
        const Real t = std::tanh(v);
        return 1 - t * t;
      });
}

Tensor sqrt(const Tensor& x) {
  for (Real v : x.values())
    if (v < 0) throw NumericError("sqrt of negative value " + std::to_string(v));
  return unary(
      "sqrt", x, [](Real v) { return std::sqrt(v); },
      [](Real v) { return Real(0.5) / std::sqrt(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](Real v) { return v * v; }, [](Real v) { return 2 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](Real v) { return std::abs(v); },
      [](Real v) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); });
}

namespace {

template <class F>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f,
              std::function<void(std::span<const Real>, const Tensor&, const Tensor&)> back) {
  require_same(a, b, op);
  std::vector<Real> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.values()[i], b.values()[i]);
  return make_result(op, a.shape(), std::move(out), {a, b},
                     [a, b, back](std::span<const Real> g) { back(g, a, b); });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](Real x, Real y) { return x + y; },
                [](std::span<const Real> g, const Tensor& a, const Tensor& b) {
                  auto ga = grad_of(a), gb = grad_of(b);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](Real x, Real y) { return x - y; },
                [](std::span<const Real> g, const Tensor& a, const Tensor& b) {
                  auto ga = grad_of(a), gb = grad_of(b);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](Real x, Real y) { return x * y; },
                [](std::span<const Real> g, const Tensor& a, const Tensor& b) {
                  auto ga = grad_of(a), gb = grad_of(b);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.values()[i];
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.values()[i];
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary("div", a, b, [](Real x, Real y) { return x / y; },
                [](std::span<const Real> g, const Tensor& a, const Tensor& b) {
                  auto ga = grad_of(a), gb = grad_of(b);
                  const auto& av = a.values();
                  const auto& bv = b.values();
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / bv[i];
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
                });
}

Tensor scale(const Tensor& x, Real s) {
  return unary("scale", x, [s](Real v) { return v * s; }, [s](Real) { return s; });
}

Tensor add_scalar(const Tensor& x, Real s) {
  return unary("add_scalar", x, [s](Real v) { return v + s; }, [](Real) { return Real(1); });
}

Tensor scale_rows(const Tensor& x, std::span<const Real> factors) {
  if (x.ndim() == 0 || static_cast<std::size_t>(x.dim(0)) != factors.size())
    throw ShapeError("scale_rows: leading dimension of " + shape_str(x.shape()) + " vs " +
                     std::to_string(factors.size()) + " factors");
  std::vector<Real> f(factors.begin(), factors.end());
  const auto row = x.dim(0) ? x.numel() / x.dim(0) : 0;
  std::vector<Real> out(x.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= f[i / static_cast<std::size_t>(row)];
  return make_result("scale_rows", x.shape(), std::move(out), {x},
                     [x, f, row](std::span<const Real> g) {
                       auto gx = grad_of(x);
                       for (std::size_t i = 0; i < gx.size(); ++i)
                         gx[i] += g[i] * f[i / static_cast<std::size_t>(row)];
                     });
}

Tensor sum(const Tensor& x) {
  double acc = 0;
  for (Real v : x.values()) acc += v;
  return make_result("sum", {}, {static_cast<Real>(acc)}, {x}, [x](std::span<const Real> g) {
    auto gx = grad_of(x);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), Real(1) / static_cast<Real>(x.numel()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mse");
  if (a.numel() == 0) throw ShapeError("mse of empty tensors");
  const auto n = a.values().size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(a.values()[i]) - double(b.values()[i]);
    acc += d * d;
  }
  return make_result("mse", {}, {static_cast<Real>(acc / double(n))}, {a, b},
                     [a, b, n](std::span<const Real> g) {
                       const Real s = Real(2) * g[0] / static_cast<Real>(n);
                       auto ga = grad_of(a), gb = grad_of(b);
                       for (std::size_t i = 0; i < ga.size(); ++i)
                         ga[i] += s * (a.values()[i] - b.values()[i]);
                       for (std::size_t i = 0; i < gb.size(); ++i)
                         gb[i] -= s * (a.values()[i] - b.values()[i]);
                     });
}

Tensor mse_rows(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mse_rows");
  if (a.ndim() == 0 || a.dim(0) == 0) throw ShapeError("mse_rows needs a leading batch dimension");
  const auto rows = a.dim(0);
  const auto row = static_cast<std::size_t>(a.numel() / rows);
  if (row == 0) throw ShapeError("mse_rows of empty rows");
  std::vector<Real> out(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0;
    for (std::size_t i = 0; i < row; ++i) {
      const double d = double(a.values()[r * row + i]) - double(b.values()[r * row + i]);
      acc += d * d;
    }
    out[static_cast<std::size_t>(r)] = static_cast<Real>(acc / double(row));
  }
  return make_result("mse_rows", {rows}, std::move(out), {a, b}, [a, b, row](std::span<const Real> g) {
    auto ga = grad_of(a), gb = grad_of(b);
    const Real inv = Real(2) / static_cast<Real>(row);
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += inv * g[i / row] * (a.values()[i] - b.values()[i]);
    for (std::size_t i = 0; i < gb.size(); ++i)
      gb[i] -= inv * g[i / row] * (a.values()[i] - b.values()[i]);
  });
}

Tensor max_of(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ShapeError("max_of needs a nonempty list");
  std::size_t best = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].numel() != 1)
      throw ShapeError("max_of: element " + std::to_string(i) + " is not a scalar");
    if (scalars[i].item() > scalars[best].item()) best = i;
  }
  const Tensor& winner = scalars[best];
  return make_result("max_of", {}, {winner.item()}, {winner}, [winner](std::span<const Real> g) {
    auto gw = grad_of(winner);
    if (!gw.empty()) gw[0] += g[0];
  });
}

Tensor pick(const Tensor& x, std::int64_t flat_index) {
  if (flat_index < 0 || flat_index >= x.numel())
    throw ShapeError("pick: index " + std::to_string(flat_index) + " out of range for " +
                     shape_str(x.shape()));
  return make_result("pick", {}, {x.at(flat_index)}, {x}, [x, flat_index](std::span<const Real> g) {
    auto gx = grad_of(x);
    if (!gx.empty()) gx[static_cast<std::size_t>(flat_index)] += g[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  return make_result("reshape", std::move(shape), x.values(), {x}, [x](std::span<const Real> g) {
    auto gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: empty list");
  const auto& ref = parts.front();
  require_rank(ref, 4, "concat_channels", "part 0");
  std::int64_t channels = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require_rank(parts[i], 4, "concat_channels", "each part");
    for (std::size_t d : {0u, 2u, 3u})
      if (parts[i].dim(d) != ref.dim(d))
        throw ShapeError("concat_channels: part " + std::to_string(i) + " differs in dim " +
                         std::to_string(d) + " (" + shape_str(parts[i].shape()) + " vs " +
                         shape_str(ref.shape()) + ")");
    channels += parts[i].dim(1);
  }
  const auto n = ref.dim(0), plane = ref.dim(2) * ref.dim(3);
  std::vector<Real> out(static_cast<std::size_t>(n * channels * plane));
  for (std::int64_t b = 0; b < n; ++b) {
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      const auto len = p.dim(1) * plane;
      std::copy_n(p.values().begin() + b * len, len, out.begin() + (b * channels + offset) * plane);
      offset += p.dim(1);
    }
  }
  return make_result("concat_channels", {n, channels, ref.dim(2), ref.dim(3)}, std::move(out), parts,
                     [parts, n, channels, plane](std::span<const Real> g) {
                       for (std::int64_t b = 0; b < n; ++b) {
                         std::int64_t offset = 0;
                         for (const auto& p : parts) {
                           const auto len = p.dim(1) * plane;
                           if (auto gp = grad_of(p); !gp.empty())
                             for (std::int64_t i = 0; i < len; ++i)
                               gp[b * len + i] += g[(b * channels + offset) * plane + i];
                           offset += p.dim(1);
                         }
                       }
                     });
}

Tensor concat_batch(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: empty list");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat_batch: scalars have no batch dimension");
  std::int64_t n = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& s = parts[i].shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1))
      throw ShapeError("concat_batch: part " + std::to_string(i) + " has shape " + shape_str(s) +
                       ", expected [*" + shape_str(Shape(shape.begin() + 1, shape.end())).substr(1));
    n += s[0];
  }
  shape[0] = n;
  std::vector<Real> out;
  out.reserve(static_cast<std::size_t>(numel_of(shape)));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result("concat_batch", shape, std::move(out), parts, [parts](std::span<const Real> g) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      if (auto gp = grad_of(p); !gp.empty())
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      offset += p.values().size();
    }
  });
}

Tensor slice_batch(const Tensor& x, std::int64_t begin, std::int64_t count) {
  if (x.ndim() == 0 || begin < 0 || count < 0 || begin + count > x.dim(0))
    throw ShapeError("slice_batch: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside dim 0 of " + shape_str(x.shape()));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
  return gather_batch(x, idx);
}

Tensor gather_batch(const Tensor& x, std::span<const std::int64_t> indices) {
  if (x.ndim() == 0) throw ShapeError("gather_batch: scalar input");
  const auto row = x.dim(0) ? x.numel() / x.dim(0) : 0;
  Shape shape = x.shape();
  shape[0] = static_cast<std::int64_t>(indices.size());
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  std::vector<Real> out(static_cast<std::size_t>(numel_of(shape)));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.dim(0))
      throw ShapeError("gather_batch: index " + std::to_string(idx[i]) + " out of range for dim 0 of " +
                       shape_str(x.shape()));
    std::copy_n(x.values().begin() + idx[i] * row, row, out.begin() + static_cast<std::int64_t>(i) * row);
  }
  return make_result("gather_batch", shape, std::move(out), {x}, [x, idx, row](std::span<const Real> g) {
    auto gx = grad_of(x);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::int64_t j = 0; j < row; ++j) gx[idx[i] * row + j] += g[static_cast<std::int64_t>(i) * row + j];
  });
}

Tensor fill_map(std::span<const Real> values, std::int64_t h, std::int64_t w) {
  const auto n = static_cast<std::int64_t>(values.size());
  Tensor out({n, 1, h, w});
  auto d = out.data();
  for (std::int64_t b = 0; b < n; ++b) std::fill_n(d.begin() + b * h * w, h * w, values[static_cast<std::size_t>(b)]);
  return out;
}

Tensor fill_map(Real value, std::int64_t h, std::int64_t w) { return Tensor({1, h, w}, value); }

InstanceStats instance_stats(const Tensor& x, double eps) {
  require_rank(x, 4, "instance_stats", "input");
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (plane < 1) throw ShapeError("instance_stats: empty spatial extent");
  std::vector<Real> mu(static_cast<std::size_t>(n * c)), sd(static_cast<std::size_t>(n * c));
  for (std::int64_t i = 0; i < n * c; ++i) {
    const Real* p = x.values().data() + i * plane;
    double m = 0;
    for (std::int64_t j = 0; j < plane; ++j) m += p[j];
    m /= double(plane);
    double v = 0;
    for (std::int64_t j = 0; j < plane; ++j) v += (p[j] - m) * (p[j] - m);
    v /= double(plane);
    mu[static_cast<std::size_t>(i)] = static_cast<Real>(m);
    sd[static_cast<std::size_t>(i)] = static_cast<Real>(std::sqrt(v + eps));
  }
  Tensor mean_t = make_result("instance_stats", {n, c}, mu, {x}, [x, plane](std::span<const Real> g) {
    auto gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / static_cast<std::size_t>(plane)] / Real(plane);
  });
  Tensor sigma_t = make_result("instance_stats", {n, c}, sd, {x},
                               [x, plane, mu, sd](std::span<const Real> g) {
                                 // d sigma / d x_j = (x_j - mu) / (plane * sigma)
                                 auto gx = grad_of(x);
                                 for (std::size_t i = 0; i < gx.size(); ++i) {
                                   const auto k = i / static_cast<std::size_t>(plane);
                                   gx[i] += g[k] * (x.values()[i] - mu[k]) / (Real(plane) * sd[k]);
                                 }
                               });
  return {mean_t, sigma_t};
}

Tensor channel_affine(const Tensor& x, const Tensor& scale_t, const Tensor& shift) {
  require_rank(x, 4, "channel_affine", "input");
  const Shape stat{x.dim(0), x.dim(1)};
  if (scale_t.shape() != stat || shift.shape() != stat)
    throw ShapeError("channel_affine: scale/shift must be " + shape_str(stat) + ", got " +
                     shape_str(scale_t.shape()) + " and " + shape_str(shift.shape()));
  const auto plane = x.dim(2) * x.dim(3);
  std::vector<Real> out(x.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto k = i / static_cast<std::size_t>(plane);
    out[i] = x.values()[i] * scale_t.values()[k] + shift.values()[k];
  }
  return make_result("channel_affine", x.shape(), std::move(out), {x, scale_t, shift},
                     [x, scale_t, shift, plane](std::span<const Real> g) {
                       auto gx = grad_of(x), gs = grad_of(scale_t), gh = grad_of(shift);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const auto k = i / static_cast<std::size_t>(plane);
                         if (!gx.empty()) gx[i] += g[i] * scale_t.values()[k];
                         if (!gs.empty()) gs[k] += g[i] * x.values()[i];
                         if (!gh.empty()) gh[k] += g[i];
                       }
                     });
}

Tensor spatial_mean(const Tensor& x) {
  require_rank(x, 4, "spatial_mean", "input");
  const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<Real> out(static_cast<std::size_t>(n * c));
  for (std::int64_t i = 0; i < n * c; ++i) {
    double acc = 0;
    for (std::int64_t j = 0; j < plane; ++j) acc += x.values()[i * plane + j];
    out[static_cast<std::size_t>(i)] = static_cast<Real>(acc / double(plane));
  }
  return make_result("spatial_mean", {n, c}, std::move(out), {x}, [x, plane](std::span<const Real> g) {
    auto gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / static_cast<std::size_t>(plane)] / Real(plane);
  });
}

Tensor grid_sample(const Tensor& image, const Tensor& field) {
  require_rank(image, 4, "grid_sample", "image");
  require_rank(field, 4, "grid_sample", "field");
  if (field.dim(0) != image.dim(0) || field.dim(1) != 2 || field.dim(2) != image.dim(2) ||
      field.dim(3) != image.dim(3))
    throw ShapeError("grid_sample: field " + shape_str(field.shape()) + " does not match image " +
                     shape_str(image.shape()) + " (expected [N,2,H,W])");
  const auto n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  std::vector<Real> out(image.values().size());
  kernels::grid_sample_forward(n, c, h, w, image.data(), field.data(), out);
  return make_result("grid_sample", image.shape(), std::move(out), {image, field},
                     [image, field, n, c, h, w](std::span<const Real> g) {
                       kernels::grid_sample_backward(n, c, h, w, image.data(), field.data(), g,
                                                     grad_of(image), grad_of(field));
                     });
}

namespace {

struct Lerp1 {
  std::int64_t i0, i1;
  Real f;
};

std::vector<Lerp1> align_corner_taps(std::int64_t in, std::int64_t out) {
  std::vector<Lerp1> taps(static_cast<std::size_t>(out));
  for (std::int64_t o = 0; o < out; ++o) {
    const Real pos = out > 1 ? Real(o) * Real(in - 1) / Real(out - 1) : Real(0);
    const auto i0 = std::min<std::int64_t>(static_cast<std::int64_t>(pos), std::max<std::int64_t>(in - 2, 0));
    taps[static_cast<std::size_t>(o)] = {i0, std::min(i0 + 1, in - 1), pos - Real(i0)};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, std::int64_t h, std::int64_t w) {
  require_rank(x, 4, "bilinear_upsample", "input");
  if (h < 1 || w < 1) throw ShapeError("bilinear_upsample: target size must be positive");
  const auto planes = x.dim(0) * x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const auto ty = align_corner_taps(ih, h), tx = align_corner_taps(iw, w);
  std::vector<Real> out(static_cast<std::size_t>(planes * h * w));
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const Real* src = x.values().data() + p * ih * iw;
    for (std::int64_t oy = 0; oy < h; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      for (std::int64_t ox = 0; ox < w; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const Real top = src[a.i0 * iw + b.i0] * (1 - b.f) + src[a.i0 * iw + b.i1] * b.f;
        const Real bot = src[a.i1 * iw + b.i0] * (1 - b.f) + src[a.i1 * iw + b.i1] * b.f;
        out[static_cast<std::size_t>((p * h + oy) * w + ox)] = top * (1 - a.f) + bot * a.f;
      }
    }
  }
  return make_result("bilinear_upsample", {x.dim(0), x.dim(1), h, w}, std::move(out), {x},
                     [x, ty, tx, planes, ih, iw, h, w](std::span<const Real> g) {
                       auto gx = grad_of(x);
                       if (gx.empty()) return;
#pragma omp parallel for schedule(static)
                       for (std::int64_t p = 0; p < planes; ++p) {
                         Real* dst = gx.data() + p * ih * iw;
                         for (std::int64_t oy = 0; oy < h; ++oy) {
                           const auto& a = ty[static_cast<std::size_t>(oy)];
                           for (std::int64_t ox = 0; ox < w; ++ox) {
                             const auto& b = tx[static_cast<std::size_t>(ox)];
                             const Real go = g[static_cast<std::size_t>((p * h + oy) * w + ox)];
                             dst[a.i0 * iw + b.i0] += go * (1 - a.f) * (1 - b.f);
                             dst[a.i0 * iw + b.i1] += go * (1 - a.f) * b.f;
                             dst[a.i1 * iw + b.i0] += go * a.f * (1 - b.f);
                             dst[a.i1 * iw + b.i1] += go * a.f * b.f;
                           }
                         }
                       }
                     });
}

Tensor max_pool2(const Tensor& x) {
  require_rank(x, 4, "max_pool2", "input");
  if (x.dim(2) % 2 || x.dim(3) % 2)
    throw ShapeError("max_pool2: spatial size " + std::to_string(x.dim(2)) + "x" +
                     std::to_string(x.dim(3)) + " is not divisible by 2");
  const auto planes = x.dim(0) * x.dim(1);
  Shape shape{x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2};
  std::vector<Real> out(static_cast<std::size_t>(numel_of(shape)));
  std::vector<std::int64_t> argmax(out.size());
  kernels::max_pool2_forward(planes, x.dim(2), x.dim(3), x.data(), out, argmax);
  return make_result("max_pool2", shape, std::move(out), {x},
                     [x, argmax = std::move(argmax)](std::span<const Real> g) {
                       auto gx = grad_of(x);
                       if (gx.empty()) return;
                       for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
                     });
}

MORPH_END_NAMESPACE
