#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "morph/losses.hpp"
#include "test_support.hpp"

using namespace morph;
using namespace morph_test;

namespace {

ExtractorSpec tiny() {
  ExtractorSpec s;
  s.widths = {3, 4, 4, 6, 6};
  s.convs_per_group = {1, 1, 1, 1, 1};
  return s;
}

DiscScores constant_scores(std::int64_t n, Real v) {
  return {Tensor::full({n, 1, 4, 4}, v), Tensor::full({n, 1, 1, 1}, v)};
}

Tensor frame(const Tensor& seq, std::int64_t i) { return gather_batch(seq, std::vector<std::int64_t>{i}); }

}  // namespace

TEST_CASE("lsgan discriminator and generator examples") {
  CHECK(lsgan_d(constant_scores(2, 1), constant_scores(2, 0)).item() == 0);
  CHECK(lsgan_d(constant_scores(2, Real(0.5)), constant_scores(2, Real(0.5))).item() == doctest::Approx(1.0));
  CHECK(lsgan_g(constant_scores(3, 1)).item() == 0);
  CHECK(lsgan_g(constant_scores(3, 0)).item() == doctest::Approx(2.0));
  double prev = 3;
  for (Real s : {Real(0.1), Real(0.4), Real(0.7), Real(0.95)}) {
    const double v = lsgan_g(constant_scores(1, s)).item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("lsgan losses are differentiable") {
  std::mt19937_64 rng(40);
  Tensor rl = random_tensor({2, 1, 4, 4}, rng, 0, 1), rg = random_tensor({2, 1, 1, 1}, rng, 0, 1);
  Tensor fl = random_tensor({2, 1, 4, 4}, rng, 0, 1), fg = random_tensor({2, 1, 1, 1}, rng, 0, 1);
  CHECK(gradcheck([&] { return lsgan_d({rl, rg}, {fl, fg}); }, {rl, rg, fl, fg}).max_rel_error < 1e-4);
  CHECK(gradcheck([&] { return lsgan_g({fl, fg}); }, {fl, fg}).max_rel_error < 1e-4);
}

TEST_CASE("transition loss zero case and identical frames") {
  const auto ext = random_extractor(41, tiny());
  std::mt19937_64 rng(41);
  const Tensor a = random_tensor({1, 3, 32, 32}, rng, -1, 1, false), b = random_tensor({1, 3, 32, 32}, rng, -1, 1, false);
  const Tensor frames = concat_batch({a, b});
  CHECK(transition_loss(ext, frames, a, b, {uniform_schedule(2)}).item() == 0);

  const Tensor same = concat_batch({a, a, a});
  const double pab = ps(ext, a, b, {4, 5}).item();
  CHECK(double(transition_loss(ext, same, a, b, {uniform_schedule(3)}).item()) ==
        doctest::Approx(0.25 * pab * pab).epsilon(1e-12));
}

TEST_CASE("transition loss recomputed from ps on a random three-frame case") {
  const auto ext = random_extractor(42, tiny());
  std::mt19937_64 rng(42);
  const Tensor a = random_tensor({1, 3, 32, 32}, rng, -1, 1, false), b = random_tensor({1, 3, 32, 32}, rng, -1, 1, false);
  const Tensor frames = random_tensor({3, 3, 32, 32}, rng, -1, 1, false);
  const TimeSchedule s = dual_schedule({0, Real(0.3), 1}, {0, Real(0.7), 1});
  const double pab = ps(ext, a, b, {4, 5}).item();
  const double d1 = double(ps(ext, frame(frames, 0), frame(frames, 1), {4, 5}).item()) - 0.3 * pab;
  const double d2 = double(ps(ext, frame(frames, 1), frame(frames, 2), {4, 5}).item()) - 0.7 * pab;
  CHECK(double(transition_loss(ext, frames, a, b, {s}).item()) ==
        doctest::Approx(std::max(d1 * d1, d2 * d2)).epsilon(1e-12));
}

TEST_CASE("reconstruction loss examples") {
  std::mt19937_64 rng(43);
  const Tensor a = random_tensor({2, 3, 4, 4}, rng, -1, 1, false), b = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
  CHECK(recon_loss(a, b, a, b).item() == 0);
  const Real c = Real(0.3);
  CHECK(double(recon_loss(a, add_scalar(b, c), a, b).item()) == doctest::Approx(double(c) * c).epsilon(1e-12));
  const Tensor f = random_tensor({2, 3, 4, 4}, rng, -1, 1, false), l = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
  CHECK(recon_loss(f, l, a, b).item() == recon_loss(l, f, b, a).item());
}

TEST_CASE("warp and identity regularizer examples") {
  const auto ext = random_extractor(44, tiny());
  std::mt19937_64 rng(44);
  const Tensor b = random_tensor({2, 3, 32, 32}, rng, -1, 1, false);
  CHECK(warp_loss(ext, b, b).item() == 0);
  CHECK(identity_reg(identity_grid(5, 2)).item() == 0);
  const Real delta = Real(0.125);
  const ControlGrid shifted(add_scalar(identity_grid(5, 2).values(), delta));
  CHECK(double(identity_reg(shifted).item()) == doctest::Approx(double(delta) * delta).epsilon(1e-12));
}

TEST_CASE("endpoint blend loss zero case, coefficient zeros and recomputation") {
  const auto ext = random_extractor(45, tiny());
  std::mt19937_64 rng(45);
  const Tensor frames = random_tensor({3, 3, 32, 32}, rng, -1, 1, false);
  const TimeSchedule s = uniform_schedule(3);
  CHECK(endpoint_blend_loss(ext, frames, frames, frames, {s}).item() == 0);

  const Tensor a_seq = random_tensor({3, 3, 32, 32}, rng, -1, 1, false);
  const Tensor b_seq = random_tensor({3, 3, 32, 32}, rng, -1, 1, false);
  const TimeSchedule ts = dual_schedule({0, Real(0.5), 1}, {0, Real(0.2), 1});
  double expect = 0;
  const double t[3] = {0, double(Real(0.2)), 1};
  for (std::int64_t i = 0; i < 3; ++i) {
    expect += (1 - t[i]) * double(ps(ext, frame(frames, i), frame(a_seq, i), {4}).item());
    expect += t[i] * double(ps(ext, frame(frames, i), frame(b_seq, i), {4}).item());
  }
  CHECK(double(endpoint_blend_loss(ext, frames, a_seq, b_seq, {ts}).item()) == doctest::Approx(expect).epsilon(1e-12));

  // Frame 0 sits at t=0: matching A there removes its term regardless of B.
  const Tensor f0 = concat_batch({frame(a_seq, 0), frame(frames, 1), frame(b_seq, 2)});
  const double with_b = endpoint_blend_loss(ext, f0, a_seq, b_seq, {ts}).item();
  const double mid = (1 - t[1]) * double(ps(ext, frame(f0, 1), frame(a_seq, 1), {4}).item()) +
                     t[1] * double(ps(ext, frame(f0, 1), frame(b_seq, 1), {4}).item());
  CHECK(with_b == doctest::Approx(mid).epsilon(1e-12));
}

TEST_CASE("total_g weights, toggles and exclusions") {
  LossComponents ones{Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1),
                      Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1)};
  LossWeights w;
  w.gan = w.transition = w.recon = w.warp = w.identity = w.endpoint = 1;
  CHECK(total_g(ones, w).item() == 6);
  LossWeights zero = w;
  zero.gan = zero.transition = zero.recon = zero.warp = zero.identity = zero.endpoint = 0;
  CHECK(total_g(ones, zero).item() == 0);

  LossWeights no_stn = w;
  no_stn.use_stn = false;
  CHECK(total_g(ones, no_stn).item() == 3);
  CHECK_FALSE(no_stn.normalized().use_global_ps);
  LossComponents partial{Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1), {}, {}, {}};
  CHECK(total_g(partial, no_stn).item() == 3);
  CHECK_THROWS_AS(total_g(partial, w), std::invalid_argument);

  LossWeights dflt;
  CHECK(total_g(ones, dflt).item() == 24);
}

TEST_CASE("PS-based losses pass finite differences") {
  const auto ext = random_extractor(46, tiny());
  std::mt19937_64 rng(46);
  const Tensor a = random_tensor({1, 3, 32, 32}, rng, -1, 1, false), b = random_tensor({1, 3, 32, 32}, rng, -1, 1, false);
  Tensor frames = random_tensor({3, 3, 32, 32}, rng);
  Tensor a_seq = random_tensor({3, 3, 32, 32}, rng);
  const TimeSchedule s = dual_schedule({0, Real(0.4), 1}, {0, Real(0.6), 1});
  CHECK(gradcheck([&] { return transition_loss(ext, frames, a, b, {s}); }, {frames}).max_rel_error < 1e-4);
  CHECK(gradcheck([&] { return endpoint_blend_loss(ext, frames, a_seq, frames, {s}); }, {frames, a_seq})
            .max_rel_error < 1e-4);
  Tensor warped = random_tensor({1, 3, 32, 32}, rng);
  CHECK(gradcheck([&] { return warp_loss(ext, warped, b); }, {warped}).max_rel_error < 1e-4);
}

TEST_CASE("pixel losses pass finite differences") {
  std::mt19937_64 rng(47);
  Tensor f = random_tensor({2, 3, 4, 4}, rng), l = random_tensor({2, 3, 4, 4}, rng);
  const Tensor a = random_tensor({2, 3, 4, 4}, rng, -1, 1, false), b = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
  CHECK(gradcheck([&] { return recon_loss(f, l, a, b); }, {f, l}).max_rel_error < 1e-4);
  Tensor g = random_tensor({2, 2, 3, 3}, rng);
  CHECK(gradcheck([&] { return identity_reg(ControlGrid(g)); }, {g}).max_rel_error < 1e-4);
}
