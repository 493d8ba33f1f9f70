#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Core>

#include "morph/kernels.hpp"

MORPH_BEGIN_NAMESPACE
namespace kernels {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Column matrix [C*kh*kw, Ho*Wo] of one sample.
void im2col(const ConvGeometry& g, const Real* src_sample, Real* cols) {
  const auto ho = g.out_h(), wo = g.out_w();
  const auto plane = ho * wo;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    const Real* src = src_sample + c * g.in_h * g.in_w;
    for (std::int64_t i = 0; i < g.kernel_h; ++i)
      for (std::int64_t j = 0; j < g.kernel_w; ++j) {
        Real* dst = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const auto y = oy * g.stride - g.padding + i;
          Real* row = dst + oy * wo;
          if (y < 0 || y >= g.in_h) {
            std::fill(row, row + wo, Real(0));
            continue;
          }
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const auto x = ox * g.stride - g.padding + j;
            row[ox] = (x < 0 || x >= g.in_w) ? Real(0) : src[y * g.in_w + x];
          }
        }
      }
  }
}

void col2im_add(const ConvGeometry& g, const Real* cols, Real* dst_sample) {
  const auto ho = g.out_h(), wo = g.out_w();
  const auto plane = ho * wo;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    Real* dst = dst_sample + c * g.in_h * g.in_w;
    for (std::int64_t i = 0; i < g.kernel_h; ++i)
      for (std::int64_t j = 0; j < g.kernel_w; ++j) {
        const Real* src = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const auto y = oy * g.stride - g.padding + i;
          if (y < 0 || y >= g.in_h) continue;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const auto x = ox * g.stride - g.padding + j;
            if (x < 0 || x >= g.in_w) continue;
            dst[y * g.in_w + x] += src[oy * wo + ox];
          }
        }
      }
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Every sample runs its own GEMM, so a sample's result does not depend on
// what else is in the batch.
void conv2d_forward(const ConvGeometry& g, std::span<const Real> in, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> out) {
  const auto plane = g.out_h() * g.out_w();
  const auto rows = g.in_channels * g.kernel_h * g.kernel_w;
  const auto in_sample = g.in_channels * g.in_h * g.in_w;
  ConstRowMap w(weight.data(), g.out_channels, rows);
#pragma omp parallel
  {
    RowMat cols(rows, plane);
#pragma omp for schedule(static)
    for (std::int64_t n = 0; n < g.batch; ++n) {
      im2col(g, in.data() + n * in_sample, cols.data());
      RowMap y(out.data() + n * g.out_channels * plane, g.out_channels, plane);
      y.noalias() = w * cols;
      if (!bias.empty())
        for (std::int64_t k = 0; k < g.out_channels; ++k) y.row(k).array() += bias[k];
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const Real> grad_out,
                           std::span<const Real> weight, std::span<Real> grad_in) {
  const auto plane = g.out_h() * g.out_w();
  const auto rows = g.in_channels * g.kernel_h * g.kernel_w;
  const auto in_sample = g.in_channels * g.in_h * g.in_w;
  ConstRowMap w(weight.data(), g.out_channels, rows);
#pragma omp parallel
  {
    RowMat dcols(rows, plane);
#pragma omp for schedule(static)
    for (std::int64_t n = 0; n < g.batch; ++n) {
      ConstRowMap dy(grad_out.data() + n * g.out_channels * plane, g.out_channels, plane);
      dcols.noalias() = w.transpose() * dy;
      col2im_add(g, dcols.data(), grad_in.data() + n * in_sample);
    }
  }
}

// Columns are built in parallel; the per-sample products are accumulated in
// sample order so the result is independent of the thread count.
void conv2d_backward_weight(const ConvGeometry& g, std::span<const Real> in,
                            std::span<const Real> grad_out, std::span<Real> grad_weight) {
  const auto plane = g.out_h() * g.out_w();
  const auto rows = g.in_channels * g.kernel_h * g.kernel_w;
  const auto in_sample = g.in_channels * g.in_h * g.in_w;
  std::vector<Real> cols(static_cast<std::size_t>(g.batch * rows * plane));
#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) im2col(g, in.data() + n * in_sample, cols.data() + n * rows * plane);
  RowMap dw(grad_weight.data(), g.out_channels, rows);
  for (std::int64_t n = 0; n < g.batch; ++n) {
    ConstRowMap dy(grad_out.data() + n * g.out_channels * plane, g.out_channels, plane);
    ConstRowMap c(cols.data() + n * rows * plane, rows, plane);
    dw.noalias() += dy * c.transpose();
  }
}

void grid_sample_forward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                         std::span<const Real> image, std::span<const Real> field,
                         std::span<Real> out) {
  const auto hw = h * w;
  const Real sx = Real(0.5) * Real(w - 1), sy = Real(0.5) * Real(h - 1);
  const auto xmax = std::max<std::int64_t>(w - 2, 0), ymax = std::max<std::int64_t>(h - 2, 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t p = 0; p < hw; ++p) {
      const Real px = std::clamp((field[(b * 2) * hw + p] + Real(1)) * sx, Real(0), Real(w - 1));
      const Real py = std::clamp((field[(b * 2 + 1) * hw + p] + Real(1)) * sy, Real(0), Real(h - 1));
      const auto x0 = std::min(static_cast<std::int64_t>(px), xmax);
      const auto y0 = std::min(static_cast<std::int64_t>(py), ymax);
      const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const Real fx = px - Real(x0), fy = py - Real(y0);
      const Real w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy), w10 = (1 - fx) * fy, w11 = fx * fy;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const Real* src = image.data() + (b * c + ch) * hw;
        out[(b * c + ch) * hw + p] = src[y0 * w + x0] * w00 + src[y0 * w + x1] * w01 +
                                     src[y1 * w + x0] * w10 + src[y1 * w + x1] * w11;
      }
    }
}

void grid_sample_backward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::span<const Real> image, std::span<const Real> field,
                          std::span<const Real> grad_out, std::span<Real> grad_image,
                          std::span<Real> grad_field) {
  const auto hw = h * w;
  const Real sx = Real(0.5) * Real(w - 1), sy = Real(0.5) * Real(h - 1);
  const auto xmax = std::max<std::int64_t>(w - 2, 0), ymax = std::max<std::int64_t>(h - 2, 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t p = 0; p < hw; ++p) {
      const Real fxv = field[(b * 2) * hw + p], fyv = field[(b * 2 + 1) * hw + p];
      const Real px = std::clamp((fxv + Real(1)) * sx, Real(0), Real(w - 1));
      const Real py = std::clamp((fyv + Real(1)) * sy, Real(0), Real(h - 1));
      const auto x0 = std::min(static_cast<std::int64_t>(px), xmax);
      const auto y0 = std::min(static_cast<std::int64_t>(py), ymax);
      const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const Real fx = px - Real(x0), fy = py - Real(y0);
      Real gx = 0, gy = 0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto base = (b * c + ch) * hw;
        const Real go = grad_out[base + p];
        if (!grad_image.empty()) {
          grad_image[base + y0 * w + x0] += go * (1 - fx) * (1 - fy);
          grad_image[base + y0 * w + x1] += go * fx * (1 - fy);
          grad_image[base + y1 * w + x0] += go * (1 - fx) * fy;
          grad_image[base + y1 * w + x1] += go * fx * fy;
        }
        const Real* src = image.data() + base;
        const Real v00 = src[y0 * w + x0], v01 = src[y0 * w + x1];
        const Real v10 = src[y1 * w + x0], v11 = src[y1 * w + x1];
        gx += go * ((v01 - v00) * (1 - fy) + (v11 - v10) * fy);
        gy += go * ((v10 - v00) * (1 - fx) + (v11 - v01) * fx);
      }
      if (!grad_field.empty()) {
        if (fxv >= Real(-1) && fxv <= Real(1)) grad_field[(b * 2) * hw + p] += gx * sx;
        if (fyv >= Real(-1) && fyv <= Real(1)) grad_field[(b * 2 + 1) * hw + p] += gy * sy;
      }
    }
}

void max_pool2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                       std::span<const Real> in, std::span<Real> out,
                       std::span<std::int64_t> argmax) {
  const auto ho = h / 2, wo = w / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t oy = 0; oy < ho; ++oy)
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const auto r0 = p * h * w + (2 * oy) * w + 2 * ox;
        const auto r1 = r0 + w;
        auto best = r0;
        if (in[r0 + 1] > in[best]) best = r0 + 1;
        if (in[r1] > in[best]) best = r1;
        if (in[r1 + 1] > in[best]) best = r1 + 1;
        const auto o = (p * ho + oy) * wo + ox;
        out[o] = in[best];
        argmax[o] = best;
      }
}

}  // namespace kernels
MORPH_END_NAMESPACE
