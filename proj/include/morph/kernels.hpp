#pragma once

// Raw numeric kernels behind the differentiable ops. Two implementations
// share each signature:
//   kernels::        OpenMP-parallel production path (im2col + GEMM for convs)
//   kernels::reference  plain serial loops, kept as the test oracle
// Both are deterministic for a fixed thread count: parallel loops only split
// work whose outputs are disjoint.

#include <cstdint>
#include <span>

#include "morph/real.hpp"

MORPH_BEGIN_NAMESPACE
namespace kernels {

struct ConvGeometry {
  std::int64_t batch = 1;
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t in_h = 1, in_w = 1;
  std::int64_t kernel_h = 1, kernel_w = 1;
  std::int64_t stride = 1, padding = 0;

  std::int64_t out_h() const { return (in_h + 2 * padding - kernel_h) / stride + 1; }
  std::int64_t out_w() const { return (in_w + 2 * padding - kernel_w) / stride + 1; }
};

// Cross-correlation. in: [N,C,H,W], weight: [K,C,kh,kw], out: [N,K,Ho,Wo].
// Output is overwritten. Bias (optional, [K]) is added.
void conv2d_forward(const ConvGeometry& g, std::span<const Real> in, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> out);
// grad_in += conv2d input-adjoint of grad_out.
void conv2d_backward_input(const ConvGeometry& g, std::span<const Real> grad_out,
                           std::span<const Real> weight, std::span<Real> grad_in);
// grad_weight += sum over batch of grad_out (x) im2col(in).
void conv2d_backward_weight(const ConvGeometry& g, std::span<const Real> in,
                            std::span<const Real> grad_out, std::span<Real> grad_weight);

// Backward bilinear warp with align-corners normalized coordinates and
// clamp-to-border. image: [N,C,H,W], field: [N,2,H,W] (x then y), out: [N,C,H,W].
void grid_sample_forward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                         std::span<const Real> image, std::span<const Real> field,
                         std::span<Real> out);
// Accumulates into grad_image / grad_field; either may be empty.
void grid_sample_backward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::span<const Real> image, std::span<const Real> field,
                          std::span<const Real> grad_out, std::span<Real> grad_image,
                          std::span<Real> grad_field);

// 2x2 max pooling, stride 2. argmax receives the flat input index per output.
void max_pool2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                       std::span<const Real> in, std::span<Real> out,
                       std::span<std::int64_t> argmax);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const Real> in, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> out);
void conv2d_backward_input(const ConvGeometry& g, std::span<const Real> grad_out,
                           std::span<const Real> weight, std::span<Real> grad_in);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const Real> in,
                            std::span<const Real> grad_out, std::span<Real> grad_weight);
void grid_sample_forward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                         std::span<const Real> image, std::span<const Real> field,
                         std::span<Real> out);
void grid_sample_backward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::span<const Real> image, std::span<const Real> field,
                          std::span<const Real> grad_out, std::span<Real> grad_image,
                          std::span<Real> grad_field);
void max_pool2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                       std::span<const Real> in, std::span<Real> out,
                       std::span<std::int64_t> argmax);

}  // namespace reference

int max_threads();

}  // namespace kernels
MORPH_END_NAMESPACE
