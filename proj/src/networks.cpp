#include "morph/networks.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "morph/ops.hpp"

MORPH_BEGIN_NAMESPACE

int NetworkSpec::depth() const {
  if (resolution < 8 || !std::has_single_bit(static_cast<std::uint64_t>(resolution)))
    throw std::invalid_argument("resolution must be a power of two >= 8, got " + std::to_string(resolution));
  return std::countr_zero(static_cast<std::uint64_t>(resolution)) - 2;
}

Encoder::Encoder(const NetworkSpec& spec, Rng& rng) {
  std::int64_t in = 3;
  for (int i = 0; i < spec.depth(); ++i) {
    const auto out = spec.enc_base << i;
    blocks_.emplace_back(in, out, 4, 2, 1, spec.init_std, rng);
    in = out;
  }
}

Tensor Encoder::operator()(const Tensor& image) const {
  Tensor x = image;
  for (const auto& b : blocks_) x = relu(b(x));
  return x;
}

ParameterList Encoder::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("enc.block" + std::to_string(i), out);
  return out;
}

Decoder::Decoder(const NetworkSpec& spec, Rng& rng) {
  const int depth = spec.depth();
  std::int64_t in = 2 * spec.enc_channels() + spec.time_channels;
  for (int i = depth - 2; i >= -1; --i) {
    const std::int64_t out = i >= 0 ? (spec.enc_base << i) : 3;
    blocks_.emplace_back(in, out, 4, 2, 1, spec.init_std, rng);
    in = out;
  }
}

Tensor Decoder::operator()(const Tensor& stack) const {
  Tensor x = stack;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i](x);
    x = i + 1 < blocks_.size() ? relu(x) : tanh(x);
  }
  return x;
}

ParameterList Decoder::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("dec.block" + std::to_string(i), out);
  return out;
}

BlendedStats blend_stats(const Tensor& mu_a, const Tensor& sigma_a, const Tensor& mu_b,
                         const Tensor& sigma_b, std::span<const Real> t) {
  std::vector<Real> one_minus(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) one_minus[i] = Real(1) - t[i];
  BlendedStats s;
  s.mean = add(scale_rows(mu_a, one_minus), scale_rows(mu_b, t));
  s.sigma = sqrt(add(scale_rows(square(sigma_a), one_minus), scale_rows(square(sigma_b), t)));
  return s;
}

AdainPair adain_blend(const Tensor& fa, const Tensor& fb, std::span<const Real> t) {
  if (fa.shape() != fb.shape())
    throw ShapeError("adain_blend: feature shapes differ " + shape_str(fa.shape()) + " vs " +
                     shape_str(fb.shape()));
  const auto sa = instance_stats(fa), sb = instance_stats(fb);
  const auto target = blend_stats(sa.mean, sa.sigma, sb.mean, sb.sigma, t);
  auto renorm = [&](const Tensor& f, const InstanceStats& s) {
    const Tensor gain = div(target.sigma, s.sigma);
    return channel_affine(f, gain, sub(target.mean, mul(s.mean, gain)));
  };
  return {renorm(fa, sa), renorm(fb, sb)};
}

Tensor assemble(const Tensor& fa, const Tensor& fb, std::span<const Real> content,
                std::span<const Real> style) {
  const auto h = fa.dim(2), w = fa.dim(3);
  std::vector<Tensor> parts{fa, fb, fill_map(content, h, w)};
  if (!style.empty()) parts.push_back(fill_map(style, h, w));
  return concat_channels(parts);
}

Generator::Generator(const NetworkSpec& s, Rng& rng) : spec(s), encoder(s, rng), decoder(s, rng) {}

Tensor Generator::generate_frames(const Tensor& a_warped, const Tensor& b_warped,
                                  std::span<const Real> content, std::span<const Real> style,
                                  bool use_adain) const {
  const auto n = a_warped.dim(0);
  if (static_cast<std::int64_t>(content.size()) != n || static_cast<std::int64_t>(style.size()) != n)
    throw ShapeError("generate_frames: need one content and one style time per frame");
  const Tensor both = encode(concat_batch({a_warped, b_warped}));
  Tensor fa = slice_batch(both, 0, n), fb = slice_batch(both, n, n);
  if (use_adain) {
    auto blended = adain_blend(fa, fb, style);
    fa = blended.a;
    fb = blended.b;
  }
  const bool dual = spec.time_channels == 2;
  return decode(assemble(fa, fb, content, dual ? style : std::span<const Real>{}));
}

ParameterList Generator::parameters() const {
  ParameterList out;
  out.append("", encoder.parameters());
  out.append("", decoder.parameters());
  return out;
}

SequenceOutput generate_sequence(const Generator& g, const StnHead* stn, const Tensor& a, const Tensor& b,
                                 const std::vector<TimeSchedule>& schedules, bool use_adain) {
  SequenceOutput out;
  out.warped = warp_sequence(stn, a, b, schedules, stn ? stn->spec().grid : 5);
  std::vector<Real> content, style;
  for (const auto& s : schedules) {
    content.insert(content.end(), s.content.begin(), s.content.end());
    style.insert(style.end(), s.style.begin(), s.style.end());
  }
  out.frames = g.generate_frames(out.warped.a_seq, out.warped.b_seq, content, style, use_adain);
  return out;
}

LocalDiscriminator::LocalDiscriminator(const NetworkSpec& spec, Rng& rng) {
  std::int64_t in = 3;
  for (int i = 0; i < 3; ++i) {
    const auto out = spec.d_base << i;
    blocks_.emplace_back(in, out, 4, 2, 1, spec.init_std, rng);
    in = out;
  }
  head_ = Conv2d(in, 1, 1, 1, 0, spec.init_std, rng);
}

Tensor LocalDiscriminator::operator()(const Tensor& image) const {
  Tensor x = image;
  for (const auto& b : blocks_) x = relu(b(x));
  return sigmoid(head_(x));
}

ParameterList LocalDiscriminator::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("dl.block" + std::to_string(i), out);
  head_.collect("dl.head", out);
  return out;
}

GlobalDiscriminator::GlobalDiscriminator(const NetworkSpec& spec, Rng& rng) {
  std::int64_t in = 3;
  std::int64_t size = spec.resolution;
  for (int i = 0; size > 1; ++i, size /= 2) {
    const auto out = spec.d_base << std::min(i, 3);
    blocks_.emplace_back(in, out, 4, 2, 1, spec.init_std, rng);
    in = out;
  }
  head_ = Conv2d(in, 1, 1, 1, 0, spec.init_std, rng);
}

Tensor GlobalDiscriminator::operator()(const Tensor& image) const {
  Tensor x = image;
  for (const auto& b : blocks_) x = relu(b(x));
  return sigmoid(head_(x));
}

ParameterList GlobalDiscriminator::parameters() const {
  ParameterList out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("dg.block" + std::to_string(i), out);
  head_.collect("dg.head", out);
  return out;
}

ParameterList Discriminators::parameters() const {
  ParameterList out;
  out.append("", local.parameters());
  out.append("", global.parameters());
  return out;
}

MORPH_END_NAMESPACE
