#pragma once

// Training objectives. Batched inputs hold P pairs; sequence tensors hold
// P*k frames with frame i of pair p at row p*k+i. Every loss is averaged over
// pairs.

#include <span>
#include <vector>

#include "morph/perceptual.hpp"
#include "morph/schedule.hpp"
#include "morph/warp.hpp"

MORPH_BEGIN_NAMESPACE

struct LossWeights {
  double gan = 1.0;         // adversarial generator term
  double transition = 10.0;
  double recon = 10.0;
  double warp = 1.0;
  double identity = 1.0;
  double endpoint = 1.0;

  bool use_gan = true;
  bool use_local_ps = true;   // transition loss
  bool use_global_ps = true;  // endpoint blend loss
  bool use_recon = true;
  bool use_adain = true;
  bool use_stn = true;

  // Turning the STN off also turns off the global PS term.
  LossWeights normalized() const;
};

/// Layer groups used by each PS-based loss.
struct PsGroups {
  LayerGroupSet transition{4, 5};
  LayerGroupSet warp{5};
  LayerGroupSet endpoint{4};
  PsAggregation aggregation = PsAggregation::MeanOfGroups;

  // Content/style mode computes the endpoint blend on group 3.
  static PsGroups for_mode(bool content_style, PsAggregation agg = PsAggregation::MeanOfGroups);
};

struct DiscScores {
  Tensor local;   // [N,1,s,s]
  Tensor global;  // [N,1,1,1]
};

// Sum over {local, global} x {real, fake} of MSE to labels (real 1, fake 0).
Tensor lsgan_d(const DiscScores& real, const DiscScores& fake);
// Sum over {local, global} of MSE of fake scores to label 1.
Tensor lsgan_g(const DiscScores& fake);

// max_{i>=2} (PS(I_{i-1}, I_i) - (t_i - t_{i-1}) * PS(I_A, I_B))^2, averaged over pairs.
// consecutive_ps: [P*(k-1)], row p*(k-1)+i-1 holds PS(I_{i-1}, I_i) of pair p.
// pair_ps: PS(I_A, I_B) per pair. Uses the content axis of each schedule.
Tensor transition_loss_from_ps(const Tensor& consecutive_ps, std::span<const Real> pair_ps,
                               const std::vector<TimeSchedule>& schedules);
Tensor transition_loss(const FeatureExtractor& ext, const Tensor& frames, const Tensor& a, const Tensor& b,
                       const std::vector<TimeSchedule>& schedules, const PsGroups& groups = {});

// MSE(I_1, I_A) + MSE(I_k, I_B) with first/last: [P,3,H,W].
Tensor recon_loss(const Tensor& first, const Tensor& last, const Tensor& a, const Tensor& b);

// PS over the warp groups between the fully warped source and the target.
Tensor warp_loss(const FeatureExtractor& ext, const Tensor& warped, const Tensor& target,
                 const PsGroups& groups = {});
// MSE between the predicted lattice and the identity lattice.
Tensor identity_reg(const ControlGrid& w);

// sum_i (1 - t_i) PS(I_i, I_A^{t_i}) + t_i PS(I_i, I_B^{t_i}), averaged over
// pairs. Uses the style axis of each schedule. ps_to_a/ps_to_b: [P*k].
Tensor endpoint_blend_loss_from_ps(const Tensor& ps_to_a, const Tensor& ps_to_b,
                                   const std::vector<TimeSchedule>& schedules);
Tensor endpoint_blend_loss(const FeatureExtractor& ext, const Tensor& frames, const Tensor& a_seq,
                           const Tensor& b_seq, const std::vector<TimeSchedule>& schedules,
                           const PsGroups& groups = {});

/// Components of the generator objective; disabled terms stay undefined.
struct LossComponents {
  Tensor adv_g, transition, recon, warp, identity, endpoint;
};

// lambda-weighted sum of the enabled components.
Tensor total_g(const LossComponents& c, const LossWeights& w);

MORPH_END_NAMESPACE
