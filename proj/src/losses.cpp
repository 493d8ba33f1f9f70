#include "morph/losses.hpp"

#include <stdexcept>

MORPH_BEGIN_NAMESPACE

LossWeights LossWeights::normalized() const {
  LossWeights w = *this;
  if (!w.use_stn) w.use_global_ps = false;
  return w;
}

PsGroups PsGroups::for_mode(bool content_style, PsAggregation agg) {
  PsGroups g;
  if (content_style) g.endpoint = LayerGroupSet{3};
  g.aggregation = agg;
  return g;
}

namespace {

Tensor to_label(const Tensor& scores, Real label) { return mse(scores, Tensor::full(scores.shape(), label)); }

std::int64_t sequence_length(const std::vector<TimeSchedule>& schedules) {
  if (schedules.empty()) throw std::invalid_argument("loss needs at least one schedule");
  const auto k = static_cast<std::int64_t>(schedules.front().size());
  for (const auto& s : schedules)
    if (static_cast<std::int64_t>(s.size()) != k) throw std::invalid_argument("schedules must share k");
  if (k < 2) throw std::invalid_argument("schedules need k >= 2");
  return k;
}

Tensor mean_of(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return terms.size() == 1 ? acc : scale(acc, Real(1) / Real(terms.size()));
}

}  // namespace

Tensor lsgan_d(const DiscScores& real, const DiscScores& fake) {
  return add(add(to_label(real.local, 1), to_label(real.global, 1)),
             add(to_label(fake.local, 0), to_label(fake.global, 0)));
}

Tensor lsgan_g(const DiscScores& fake) { return add(to_label(fake.local, 1), to_label(fake.global, 1)); }

Tensor transition_loss_from_ps(const Tensor& consecutive_ps, std::span<const Real> pair_ps,
                               const std::vector<TimeSchedule>& schedules) {
  const auto k = sequence_length(schedules);
  const auto pairs = static_cast<std::int64_t>(schedules.size());
  if (consecutive_ps.numel() != pairs * (k - 1) || static_cast<std::int64_t>(pair_ps.size()) != pairs)
    throw ShapeError("transition_loss: expected " + std::to_string(pairs * (k - 1)) + " step PS values and " +
                     std::to_string(pairs) + " pair PS values");
  std::vector<Tensor> per_pair;
  for (std::int64_t p = 0; p < pairs; ++p) {
    const auto& t = schedules[static_cast<std::size_t>(p)].content;
    std::vector<Tensor> terms;
    for (std::int64_t i = 1; i < k; ++i) {
      const Real target = (t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(i - 1)]) *
                          pair_ps[static_cast<std::size_t>(p)];
      terms.push_back(square(add_scalar(pick(consecutive_ps, p * (k - 1) + i - 1), -target)));
    }
    per_pair.push_back(max_of(terms));
  }
  return mean_of(per_pair);
}

Tensor transition_loss(const FeatureExtractor& ext, const Tensor& frames, const Tensor& a, const Tensor& b,
                       const std::vector<TimeSchedule>& schedules, const PsGroups& groups) {
  const auto k = sequence_length(schedules);
  const auto pairs = static_cast<std::int64_t>(schedules.size());
  if (frames.dim(0) != pairs * k) throw ShapeError("transition_loss: frame count does not match schedules");
  std::vector<std::int64_t> prev, next;
  for (std::int64_t p = 0; p < pairs; ++p)
    for (std::int64_t i = 1; i < k; ++i) {
      prev.push_back(p * k + i - 1);
      next.push_back(p * k + i);
    }
  const auto feats = ext.pyramid(frames, groups.transition.max());
  std::vector<Tensor> fp, fn;
  for (int g : groups.transition.list()) {
    fp.push_back(gather_batch(feats.at(g), prev));
    fn.push_back(gather_batch(feats.at(g), next));
  }
  const Tensor step_ps = ps_rows(fp, fn, groups.aggregation);
  std::vector<Real> pair_ps;
  {
    NoGradGuard guard;
    const Tensor v = ps_rows(ext.extract(a, groups.transition), ext.extract(b, groups.transition),
                             groups.aggregation);
    pair_ps = v.values();
  }
  return transition_loss_from_ps(step_ps, pair_ps, schedules);
}

Tensor recon_loss(const Tensor& first, const Tensor& last, const Tensor& a, const Tensor& b) {
  return add(mse(first, a), mse(last, b));
}

Tensor warp_loss(const FeatureExtractor& ext, const Tensor& warped, const Tensor& target,
                 const PsGroups& groups) {
  return ps(ext, warped, target, groups.warp, groups.aggregation);
}

Tensor identity_reg(const ControlGrid& w) {
  return mse(w.values(), identity_grid(w.side(), w.batch()).values());
}

Tensor endpoint_blend_loss_from_ps(const Tensor& ps_to_a, const Tensor& ps_to_b,
                                   const std::vector<TimeSchedule>& schedules) {
  const auto k = sequence_length(schedules);
  const auto pairs = static_cast<std::int64_t>(schedules.size());
  if (ps_to_a.numel() != pairs * k || ps_to_b.numel() != pairs * k)
    throw ShapeError("endpoint_blend_loss: expected " + std::to_string(pairs * k) + " PS values per side");
  std::vector<Real> wa, wb;
  for (const auto& s : schedules)
    for (Real t : s.style) {
      wa.push_back((Real(1) - t) / Real(pairs));
      wb.push_back(t / Real(pairs));
    }
  return add(sum(scale_rows(ps_to_a, wa)), sum(scale_rows(ps_to_b, wb)));
}

Tensor endpoint_blend_loss(const FeatureExtractor& ext, const Tensor& frames, const Tensor& a_seq,
                           const Tensor& b_seq, const std::vector<TimeSchedule>& schedules,
                           const PsGroups& groups) {
  const auto ff = ext.extract(frames, groups.endpoint);
  const Tensor to_a = ps_rows(ff, ext.extract(a_seq, groups.endpoint), groups.aggregation);
  const Tensor to_b = ps_rows(ff, ext.extract(b_seq, groups.endpoint), groups.aggregation);
  return endpoint_blend_loss_from_ps(to_a, to_b, schedules);
}

Tensor total_g(const LossComponents& c, const LossWeights& weights) {
  const LossWeights w = weights.normalized();
  Tensor total = Tensor::scalar(0);
  auto term = [&](bool on, double lambda, const Tensor& value, const char* name) {
    if (!on) return;
    if (!value.defined()) throw std::invalid_argument(std::string("enabled loss component '") + name + "' is missing");
    total = add(total, scale(value, static_cast<Real>(lambda)));
  };
  term(w.use_gan, w.gan, c.adv_g, "adv_g");
  term(w.use_local_ps, w.transition, c.transition, "transition");
  term(w.use_recon, w.recon, c.recon, "recon");
  term(w.use_stn, w.warp, c.warp, "warp");
  term(w.use_stn, w.identity, c.identity, "identity");
  term(w.use_global_ps, w.endpoint, c.endpoint, "endpoint");
  return total;
}

MORPH_END_NAMESPACE
