#include "morph/warp.hpp"

#include <stdexcept>

MORPH_BEGIN_NAMESPACE

ControlGrid::ControlGrid(Tensor values) : values_(std::move(values)) {
  if (values_.ndim() != 4 || values_.dim(1) != 2 || values_.dim(2) != values_.dim(3))
    throw ShapeError("control grid must be [N,2,g,g], got " + shape_str(values_.shape()));
}

ControlGrid identity_grid(std::int64_t g, std::int64_t batch) {
  if (g < 2) throw std::invalid_argument("control grid side must be >= 2");
  Tensor t({batch, 2, g, g});
  auto d = t.data();
  for (std::int64_t n = 0; n < batch; ++n)
    for (std::int64_t r = 0; r < g; ++r)
      for (std::int64_t c = 0; c < g; ++c) {
        d[((n * 2 + 0) * g + r) * g + c] = static_cast<Real>(-1.0 + 2.0 * double(c) / double(g - 1));
        d[((n * 2 + 1) * g + r) * g + c] = static_cast<Real>(-1.0 + 2.0 * double(r) / double(g - 1));
      }
  return ControlGrid(t);
}

ControlGrid partial_warp(const ControlGrid& w, std::span<const Real> t, WarpDirection dir) {
  if (static_cast<std::int64_t>(t.size()) != w.batch())
    throw ShapeError("partial_warp: " + std::to_string(t.size()) + " times for " +
                     std::to_string(w.batch()) + " grids");
  std::vector<Real> to_w(t.begin(), t.end()), to_id(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (dir == WarpDirection::BA) to_w[i] = Real(1) - to_w[i];
    to_id[i] = Real(1) - to_w[i];
  }
  const ControlGrid id = identity_grid(w.side(), w.batch());
  return ControlGrid(add(scale_rows(id.values(), to_id), scale_rows(w.values(), to_w)));
}

ControlGrid partial_warp(const ControlGrid& w, Real t, WarpDirection dir) {
  std::vector<Real> ts(static_cast<std::size_t>(w.batch()), t);
  return partial_warp(w, ts, dir);
}

Tensor apply(const ControlGrid& w, const Tensor& image) {
  if (image.ndim() != 4 || image.dim(0) != w.batch())
    throw ShapeError("apply: grid batch " + std::to_string(w.batch()) + " vs image " +
                     shape_str(image.shape()));
  return grid_sample(image, bilinear_upsample(w.values(), image.dim(2), image.dim(3)));
}

StnHead::StnHead(const StnSpec& spec, std::int64_t resolution, Rng& rng)
    : spec_(spec), resolution_(resolution) {
  if (resolution % 4) throw std::invalid_argument("STN input resolution must be divisible by 4");
  conv1_ = Conv2d(6, spec.conv1, 4, 2, 1, 0.02, rng);
  conv2_ = Conv2d(spec.conv1, spec.conv2, 4, 2, 1, 0.02, rng);
  const auto flat = spec.conv2 * (resolution / 4) * (resolution / 4);
  fc1_ = Linear(flat, spec.hidden, 0.02, rng);
  fc2_ = Linear(spec.hidden, 2 * spec.grid * spec.grid, 0.0, rng);
}

ControlGrid StnHead::predict(const Tensor& a, const Tensor& b) const {
  if (a.shape() != b.shape())
    throw ShapeError("predict: image shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  if (a.ndim() != 4 || a.dim(1) != 3 || a.dim(2) != resolution_ || a.dim(3) != resolution_)
    throw ShapeError("predict: expected [N,3," + std::to_string(resolution_) + "," +
                     std::to_string(resolution_) + "] images, got " + shape_str(a.shape()));
  const auto n = a.dim(0), g = spec_.grid;
  Tensor x = relu(conv1_(concat_channels({a, b})));
  x = relu(conv2_(x));
  x = reshape(x, {n, x.numel() / n});
  x = relu(fc1_(x));
  Tensor residual = scale(tanh(fc2_(x)), static_cast<Real>(spec_.residual_scale));
  return ControlGrid(add(identity_grid(g, n).values(), reshape(residual, {n, 2, g, g})));
}

ParameterList StnHead::parameters() const {
  ParameterList out;
  conv1_.collect("stn.conv1", out);
  conv2_.collect("stn.conv2", out);
  fc1_.collect("stn.fc1", out);
  fc2_.collect("stn.fc2", out);
  return out;
}

WarpedSequences warp_sequence(const StnHead* stn, const Tensor& a, const Tensor& b,
                              const std::vector<TimeSchedule>& schedules,
                              std::int64_t identity_side) {
  if (a.shape() != b.shape())
    throw ShapeError("warp_sequence: image shapes differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const auto pairs = a.dim(0);
  if (static_cast<std::int64_t>(schedules.size()) != pairs)
    throw std::invalid_argument("warp_sequence: need one schedule per pair");
  const auto k = static_cast<std::int64_t>(schedules.front().size());
  std::vector<std::int64_t> rep;
  std::vector<Real> times;
  for (std::int64_t p = 0; p < pairs; ++p) {
    const auto& s = schedules[static_cast<std::size_t>(p)];
    if (static_cast<std::int64_t>(s.size()) != k)
      throw std::invalid_argument("warp_sequence: schedules must share k");
    for (std::int64_t i = 0; i < k; ++i) {
      rep.push_back(p);
      times.push_back(s.t()[static_cast<std::size_t>(i)]);
    }
  }
  WarpedSequences out;
  const Tensor a_rep = gather_batch(a, rep), b_rep = gather_batch(b, rep);
  if (!stn) {
    out.ab = out.ba = identity_grid(identity_side, pairs);
    out.a_seq = a_rep;
    out.b_seq = b_rep;
    return out;
  }
  // One pass predicts both directions.
  const ControlGrid both = stn->predict(concat_batch({a, b}), concat_batch({b, a}));
  out.ab = ControlGrid(slice_batch(both.values(), 0, pairs));
  out.ba = ControlGrid(slice_batch(both.values(), pairs, pairs));
  const ControlGrid ab_t = partial_warp(ControlGrid(gather_batch(out.ab.values(), rep)), times, WarpDirection::AB);
  const ControlGrid ba_t = partial_warp(ControlGrid(gather_batch(out.ba.values(), rep)), times, WarpDirection::BA);
  out.a_seq = apply(ab_t, a_rep);
  out.b_seq = apply(ba_t, b_rep);
  return out;
}

MORPH_END_NAMESPACE
