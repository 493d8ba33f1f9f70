#include <algorithm>
#include <cmath>

#include "morph/kernels.hpp"

MORPH_BEGIN_NAMESPACE
namespace kernels::reference {

void conv2d_forward(const ConvGeometry& g, std::span<const Real> in, std::span<const Real> weight,
                    std::span<const Real> bias, std::span<Real> out) {
  const auto ho = g.out_h(), wo = g.out_w();
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t k = 0; k < g.out_channels; ++k)
      for (std::int64_t oy = 0; oy < ho; ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          Real acc = bias.empty() ? Real(0) : bias[k];
          for (std::int64_t c = 0; c < g.in_channels; ++c)
            for (std::int64_t i = 0; i < g.kernel_h; ++i)
              for (std::int64_t j = 0; j < g.kernel_w; ++j) {
                const auto y = oy * g.stride - g.padding + i;
                const auto x = ox * g.stride - g.padding + j;
                if (y < 0 || y >= g.in_h || x < 0 || x >= g.in_w) continue;
                acc += in[((n * g.in_channels + c) * g.in_h + y) * g.in_w + x] *
                       weight[((k * g.in_channels + c) * g.kernel_h + i) * g.kernel_w + j];
              }
          out[((n * g.out_channels + k) * ho + oy) * wo + ox] = acc;
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const Real> grad_out,
                           std::span<const Real> weight, std::span<Real> grad_in) {
  const auto ho = g.out_h(), wo = g.out_w();
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t k = 0; k < g.out_channels; ++k)
      for (std::int64_t oy = 0; oy < ho; ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const Real go = grad_out[((n * g.out_channels + k) * ho + oy) * wo + ox];
          for (std::int64_t c = 0; c < g.in_channels; ++c)
            for (std::int64_t i = 0; i < g.kernel_h; ++i)
              for (std::int64_t j = 0; j < g.kernel_w; ++j) {
                const auto y = oy * g.stride - g.padding + i;
                const auto x = ox * g.stride - g.padding + j;
                if (y < 0 || y >= g.in_h || x < 0 || x >= g.in_w) continue;
                grad_in[((n * g.in_channels + c) * g.in_h + y) * g.in_w + x] +=
                    go * weight[((k * g.in_channels + c) * g.kernel_h + i) * g.kernel_w + j];
              }
        }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const Real> in,
                            std::span<const Real> grad_out, std::span<Real> grad_weight) {
  const auto ho = g.out_h(), wo = g.out_w();
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t k = 0; k < g.out_channels; ++k)
      for (std::int64_t oy = 0; oy < ho; ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const Real go = grad_out[((n * g.out_channels + k) * ho + oy) * wo + ox];
          for (std::int64_t c = 0; c < g.in_channels; ++c)
            for (std::int64_t i = 0; i < g.kernel_h; ++i)
              for (std::int64_t j = 0; j < g.kernel_w; ++j) {
                const auto y = oy * g.stride - g.padding + i;
                const auto x = ox * g.stride - g.padding + j;
                if (y < 0 || y >= g.in_h || x < 0 || x >= g.in_w) continue;
                grad_weight[((k * g.in_channels + c) * g.kernel_h + i) * g.kernel_w + j] +=
                    go * in[((n * g.in_channels + c) * g.in_h + y) * g.in_w + x];
              }
        }
}

namespace {

struct Tap {
  std::int64_t x0, x1, y0, y1;
  Real fx, fy;
  bool clamped_x, clamped_y;
};

Tap locate(Real x, Real y, std::int64_t h, std::int64_t w) {
  Tap t{};
  Real px = (x + Real(1)) * Real(0.5) * Real(w - 1);
  Real py = (y + Real(1)) * Real(0.5) * Real(h - 1);
  t.clamped_x = x < Real(-1) || x > Real(1);
  t.clamped_y = y < Real(-1) || y > Real(1);
  px = std::clamp(px, Real(0), Real(w - 1));
  py = std::clamp(py, Real(0), Real(h - 1));
  t.x0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(px)), std::max<std::int64_t>(w - 2, 0));
  t.y0 = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(py)), std::max<std::int64_t>(h - 2, 0));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = px - Real(t.x0);
  t.fy = py - Real(t.y0);
  return t;
}

}  // namespace

void grid_sample_forward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                         std::span<const Real> image, std::span<const Real> field,
                         std::span<Real> out) {
  const auto hw = h * w;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t p = 0; p < hw; ++p) {
      const Tap t = locate(field[(b * 2) * hw + p], field[(b * 2 + 1) * hw + p], h, w);
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const Real* src = image.data() + (b * c + ch) * hw;
        const Real top = src[t.y0 * w + t.x0] * (1 - t.fx) + src[t.y0 * w + t.x1] * t.fx;
        const Real bot = src[t.y1 * w + t.x0] * (1 - t.fx) + src[t.y1 * w + t.x1] * t.fx;
        out[(b * c + ch) * hw + p] = top * (1 - t.fy) + bot * t.fy;
      }
    }
}

void grid_sample_backward(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w,
                          std::span<const Real> image, std::span<const Real> field,
                          std::span<const Real> grad_out, std::span<Real> grad_image,
                          std::span<Real> grad_field) {
  const auto hw = h * w;
  const Real sx = Real(0.5) * Real(w - 1);
  const Real sy = Real(0.5) * Real(h - 1);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t p = 0; p < hw; ++p) {
      const Tap t = locate(field[(b * 2) * hw + p], field[(b * 2 + 1) * hw + p], h, w);
      Real gx = 0, gy = 0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const Real go = grad_out[(b * c + ch) * hw + p];
        const auto base = (b * c + ch) * hw;
        if (!grad_image.empty()) {
          grad_image[base + t.y0 * w + t.x0] += go * (1 - t.fx) * (1 - t.fy);
          grad_image[base + t.y0 * w + t.x1] += go * t.fx * (1 - t.fy);
          grad_image[base + t.y1 * w + t.x0] += go * (1 - t.fx) * t.fy;
          grad_image[base + t.y1 * w + t.x1] += go * t.fx * t.fy;
        }
        const Real* src = image.data() + base;
        const Real v00 = src[t.y0 * w + t.x0], v01 = src[t.y0 * w + t.x1];
        const Real v10 = src[t.y1 * w + t.x0], v11 = src[t.y1 * w + t.x1];
        gx += go * ((v01 - v00) * (1 - t.fy) + (v11 - v10) * t.fy);
        gy += go * ((v10 - v00) * (1 - t.fx) + (v11 - v01) * t.fx);
      }
      if (!grad_field.empty()) {
        if (!t.clamped_x) grad_field[(b * 2) * hw + p] += gx * sx;
        if (!t.clamped_y) grad_field[(b * 2 + 1) * hw + p] += gy * sy;
      }
    }
}

void max_pool2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                       std::span<const Real> in, std::span<Real> out,
                       std::span<std::int64_t> argmax) {
  const auto ho = h / 2, wo = w / 2;
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t oy = 0; oy < ho; ++oy)
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        std::int64_t best = p * h * w + (2 * oy) * w + 2 * ox;
        for (std::int64_t dy = 0; dy < 2; ++dy)
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const auto idx = p * h * w + (2 * oy + dy) * w + 2 * ox + dx;
            if (in[idx] > in[best]) best = idx;
          }
        const auto o = (p * ho + oy) * wo + ox;
        out[o] = in[best];
        argmax[o] = best;
      }
}

}  // namespace kernels::reference
MORPH_END_NAMESPACE
