#pragma once

// Differentiable operators. Images and feature maps are [N,C,H,W].

#include <span>
#include <utility>
#include <vector>

#include "morph/tensor.hpp"

MORPH_BEGIN_NAMESPACE

inline constexpr double kInstanceEps = 1e-5;

// Convolutions. `bias` may be an undefined Tensor.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::int64_t stride,
              std::int64_t padding);
// Adjoint of conv2d: kernel is [Cin, Cout, kh, kw]; output extent (H-1)*stride - 2p + kh.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        std::int64_t stride, std::int64_t padding);
// x: [N,in], weight: [out,in], bias: [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real s);
Tensor add_scalar(const Tensor& x, Real s);
// Multiplies sample n (leading dimension) by the constant factors[n].
Tensor scale_rows(const Tensor& x, std::span<const Real> factors);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);
// Per-sample mean squared error over all but the leading dimension: [N].
Tensor mse_rows(const Tensor& a, const Tensor& b);
// Maximum of scalar tensors; gradient goes to the first argmax.
Tensor max_of(const std::vector<Tensor>& scalars);
Tensor pick(const Tensor& x, std::int64_t flat_index);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor concat_batch(const std::vector<Tensor>& parts);
Tensor slice_batch(const Tensor& x, std::int64_t begin, std::int64_t count);
Tensor gather_batch(const Tensor& x, std::span<const std::int64_t> indices);

// Constant planes: one [1,H,W] channel per value, stacked to [N,1,H,W].
Tensor fill_map(std::span<const Real> values, std::int64_t h, std::int64_t w);
// Single plane of shape [1,H,W].
Tensor fill_map(Real value, std::int64_t h, std::int64_t w);

struct InstanceStats {
  Tensor mean;   // [N,C]
  Tensor sigma;  // [N,C], sqrt(population variance + eps)
};
InstanceStats instance_stats(const Tensor& x, double eps = kInstanceEps);
// y[n,c,:,:] = x[n,c,:,:] * scale[n,c] + shift[n,c]
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift);
// Spatial average: [N,C,H,W] -> [N,C].
Tensor spatial_mean(const Tensor& x);

Tensor grid_sample(const Tensor& image, const Tensor& field);
// Align-corners bilinear resize.
Tensor bilinear_upsample(const Tensor& x, std::int64_t h, std::int64_t w);
Tensor max_pool2(const Tensor& x);

MORPH_END_NAMESPACE
