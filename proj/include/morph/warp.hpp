#pragma once

#include <vector>

#include "morph/nn.hpp"
#include "morph/schedule.hpp"

MORPH_BEGIN_NAMESPACE

/// Freeform-deformation control lattice: [N,2,g,g] absolute backward-sampling
/// coordinates in normalized [-1,1] space, channel 0 = x (columns), 1 = y.
class ControlGrid {
 public:
  ControlGrid() = default;
  explicit ControlGrid(Tensor values);

  const Tensor& values() const { return values_; }
  std::int64_t side() const { return values_.dim(2); }
  std::int64_t batch() const { return values_.dim(0); }

 private:
  Tensor values_;
};

enum class WarpDirection { AB, BA };

ControlGrid identity_grid(std::int64_t g, std::int64_t batch = 1);

// W^t = (1-t)*I + t*W per sample (t replaced by 1-t for BA). Endpoints are
// exact: t=0 gives I, t=1 gives W.
ControlGrid partial_warp(const ControlGrid& w, std::span<const Real> t, WarpDirection dir);
ControlGrid partial_warp(const ControlGrid& w, Real t, WarpDirection dir);

// Upsamples the lattice to the image size and backward-warps the image.
Tensor apply(const ControlGrid& w, const Tensor& image);

struct StnSpec {
  std::int64_t grid = 5;
  std::int64_t conv1 = 32;
  std::int64_t conv2 = 64;
  std::int64_t hidden = 256;
  double residual_scale = 0.5;
};

/// Predicts the A->B control lattice from channel-concatenated (A, B):
/// two stride-2 conv blocks, a hidden FC block, and a zero-initialized FC
/// residual squashed by tanh and added to the identity mesh.
class StnHead {
 public:
  StnHead() = default;
  StnHead(const StnSpec& spec, std::int64_t resolution, Rng& rng);

  ControlGrid predict(const Tensor& a, const Tensor& b) const;
  const StnSpec& spec() const { return spec_; }
  ParameterList parameters() const;

 private:
  StnSpec spec_;
  std::int64_t resolution_ = 0;
  Conv2d conv1_, conv2_;
  Linear fc1_, fc2_;
};

struct WarpedSequences {
  ControlGrid ab, ba;  // full per-pair grids [P,2,g,g]
  Tensor a_seq;        // [P*k,3,H,W], entry p*k+i is I_A^{t_i} of pair p
  Tensor b_seq;
};

// Warps every pair along its own schedule (all schedules share k). Warps
// follow the content axis. With `stn == nullptr` identity warps of side
// `identity_side` are used.
WarpedSequences warp_sequence(const StnHead* stn, const Tensor& a, const Tensor& b,
                              const std::vector<TimeSchedule>& schedules,
                              std::int64_t identity_side = 5);

MORPH_END_NAMESPACE
