#pragma once

#include <span>
#include <vector>

#include "morph/nn.hpp"
#include "morph/schedule.hpp"
#include "morph/warp.hpp"

MORPH_BEGIN_NAMESPACE

struct NetworkSpec {
  std::int64_t resolution = 32;
  std::int64_t enc_base = 64;  // encoder block i has enc_base * 2^i channels
  std::int64_t d_base = 64;
  int time_channels = 1;       // 2 in content/style mode
  double init_std = 0.02;

  // 4x4 bottleneck: 32 -> 3 blocks, 64 -> 4, 128 -> 5.
  int depth() const;
  std::int64_t enc_channels() const { return enc_base << (depth() - 1); }
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const NetworkSpec& spec, Rng& rng);
  Tensor operator()(const Tensor& image) const;
  ParameterList parameters() const;

 private:
  std::vector<Conv2d> blocks_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetworkSpec& spec, Rng& rng);
  // stack: [N, 2*C_enc + time_channels, h, w] -> image in [-1,1].
  Tensor operator()(const Tensor& stack) const;
  ParameterList parameters() const;

 private:
  std::vector<ConvTranspose2d> blocks_;
};

struct BlendedStats {
  Tensor mean;   // [N,C]
  Tensor sigma;  // [N,C]
};

// mu_t = (1-t) mu_A + t mu_B,  sigma_t = sqrt((1-t) sigma_A^2 + t sigma_B^2), t per sample.
BlendedStats blend_stats(const Tensor& mu_a, const Tensor& sigma_a, const Tensor& mu_b,
                         const Tensor& sigma_b, std::span<const Real> t);

struct AdainPair {
  Tensor a, b;
};

// Re-normalizes both maps, per sample and channel, to the blended statistics.
AdainPair adain_blend(const Tensor& fa, const Tensor& fb, std::span<const Real> t);

// Channel stack [F_A*, F_B*, time planes...]; `style` may be empty (single-axis).
Tensor assemble(const Tensor& fa, const Tensor& fb, std::span<const Real> content,
                std::span<const Real> style);

struct Generator {
  NetworkSpec spec;
  Encoder encoder;
  Decoder decoder;

  Generator() = default;
  Generator(const NetworkSpec& spec, Rng& rng);

  Tensor encode(const Tensor& image) const { return encoder(image); }
  Tensor decode(const Tensor& stack) const { return decoder(stack); }

  // Frames for already-warped inputs, one per row. `style` is used for the
  // AdaIN blend and as the second time channel in content/style mode; in
  // single-axis mode pass style == content.
  Tensor generate_frames(const Tensor& a_warped, const Tensor& b_warped, std::span<const Real> content,
                         std::span<const Real> style, bool use_adain = true) const;

  ParameterList parameters() const;
};

struct SequenceOutput {
  WarpedSequences warped;
  Tensor frames;  // [P*k,3,H,W], row p*k+i is frame i of pair p
};

// Full pipeline: warp_sequence -> encode -> adain_blend -> assemble -> decode.
SequenceOutput generate_sequence(const Generator& g, const StnHead* stn, const Tensor& a,
                                 const Tensor& b, const std::vector<TimeSchedule>& schedules,
                                 bool use_adain = true);

class LocalDiscriminator {
 public:
  LocalDiscriminator() = default;
  LocalDiscriminator(const NetworkSpec& spec, Rng& rng);
  // Patch scores [N,1,R/8,R/8] in (0,1).
  Tensor operator()(const Tensor& image) const;
  ParameterList parameters() const;

 private:
  std::vector<Conv2d> blocks_;
  Conv2d head_;
};

class GlobalDiscriminator {
 public:
  GlobalDiscriminator() = default;
  GlobalDiscriminator(const NetworkSpec& spec, Rng& rng);
  // One score per image, [N,1,1,1] in (0,1).
  Tensor operator()(const Tensor& image) const;
  ParameterList parameters() const;

 private:
  std::vector<Conv2d> blocks_;
  Conv2d head_;
};

struct Discriminators {
  LocalDiscriminator local;
  GlobalDiscriminator global;

  Discriminators() = default;
  Discriminators(const NetworkSpec& spec, Rng& rng) : local(spec, rng), global(spec, rng) {}
  ParameterList parameters() const;
};

MORPH_END_NAMESPACE
