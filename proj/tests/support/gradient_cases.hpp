#pragma once

// Finite-difference cases covering every differentiable op and every
// training loss. Each case builds its own random inputs.

#include <string>
#include <vector>

#include "morph/losses.hpp"
#include "morph/networks.hpp"
#include "test_support.hpp"

namespace morph_test {

struct GradCase {
  std::string name;
  std::function<GradCheckResult()> run;
};

inline ExtractorSpec gradient_extractor_spec() {
  ExtractorSpec s;
  s.widths = {3, 4, 4, 6, 6};
  s.convs_per_group = {1, 1, 1, 1, 1};
  return s;
}

inline std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<GradCheckResult()> f) {
    cases.push_back({std::move(name), std::move(f)});
  };
  const Shape s{2, 3, 2, 2};

  auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op, bool positive = false) {
    add_case(std::move(name), [op, positive, s] {
      std::mt19937_64 rng(100);
      Tensor x = positive ? random_tensor(s, rng, 0.5, 2.0) : random_away_from_zero(s, rng);
      return gradcheck([&] { return op(x); }, {x});
    });
  };
  unary("relu", [](const Tensor& x) { return relu(x); });
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("tanh", [](const Tensor& x) { return tanh(x); });
  unary("sqrt", [](const Tensor& x) { return sqrt(x); }, true);
  unary("square", [](const Tensor& x) { return square(x); });
  unary("abs", [](const Tensor& x) { return abs(x); });
  unary("scale", [](const Tensor& x) { return scale(x, Real(-1.5)); });
  unary("add_scalar", [](const Tensor& x) { return add_scalar(x, Real(0.3)); });
  unary("scale_rows", [](const Tensor& x) {
    const std::vector<Real> f{0.25, -2.0};
    return scale_rows(x, f);
  });
  unary("sum", [](const Tensor& x) { return sum(x); });
  unary("mean", [](const Tensor& x) { return mean(x); });
  unary("pick", [](const Tensor& x) { return pick(x, 7); });
  unary("reshape", [](const Tensor& x) { return reshape(x, {6, 4}); });
  unary("slice_batch", [](const Tensor& x) { return slice_batch(x, 1, 1); });
  unary("gather_batch", [](const Tensor& x) {
    const std::vector<std::int64_t> idx{1, 0, 1};
    return gather_batch(x, idx);
  });
  unary("spatial_mean", [](const Tensor& x) { return spatial_mean(x); });
  unary("instance_stats.mean", [](const Tensor& x) { return instance_stats(x).mean; });
  unary("instance_stats.sigma", [](const Tensor& x) { return instance_stats(x).sigma; });
  unary("max_pool2", [](const Tensor& x) { return max_pool2(x); });
  unary("bilinear_upsample", [](const Tensor& x) { return bilinear_upsample(x, 5, 3); });

  auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, bool positive_b = false) {
    add_case(std::move(name), [op, positive_b, s] {
      std::mt19937_64 rng(101);
      Tensor a = random_tensor(s, rng);
      Tensor b = positive_b ? random_tensor(s, rng, 0.5, 2.0) : random_tensor(s, rng);
      return gradcheck([&] { return op(a, b); }, {a, b});
    });
  };
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); });
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); });
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); });
  binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, true);
  binary("mse", [](const Tensor& a, const Tensor& b) { return mse(a, b); });
  binary("mse_rows", [](const Tensor& a, const Tensor& b) { return mse_rows(a, b); });
  binary("concat_channels", [](const Tensor& a, const Tensor& b) { return concat_channels({a, b}); });
  binary("concat_batch", [](const Tensor& a, const Tensor& b) { return concat_batch({a, b}); });

  add_case("max_of", [] {
    Tensor a = Tensor::scalar(0.1), b = Tensor::scalar(0.9), c = Tensor::scalar(-0.4);
    for (Tensor* t : {&a, &b, &c}) t->set_requires_grad();
    return gradcheck([&] { return max_of({a, b, c}); }, {a, b, c});
  });
  add_case("channel_affine", [] {
    std::mt19937_64 rng(102);
    Tensor x = random_tensor({2, 3, 3, 3}, rng), g = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
    return gradcheck([&] { return channel_affine(x, g, b); }, {x, g, b});
  });
  add_case("conv2d", [] {
    std::mt19937_64 rng(103);
    Tensor x = random_tensor({2, 3, 6, 6}, rng), k = random_tensor({4, 3, 4, 4}, rng), b = random_tensor({4}, rng);
    return gradcheck([&] { return conv2d(x, k, b, 2, 1); }, {x, k, b});
  });
  add_case("conv_transpose2d", [] {
    std::mt19937_64 rng(104);
    Tensor x = random_tensor({2, 3, 3, 3}, rng), k = random_tensor({3, 2, 4, 4}, rng), b = random_tensor({2}, rng);
    return gradcheck([&] { return conv_transpose2d(x, k, b, 2, 1); }, {x, k, b});
  });
  add_case("linear", [] {
    std::mt19937_64 rng(105);
    Tensor v = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    return gradcheck([&] { return linear(v, w, b); }, {v, w, b});
  });
  add_case("grid_sample", [] {
    std::mt19937_64 rng(106);
    Tensor img = random_tensor({2, 2, 5, 6}, rng), field = random_tensor({2, 2, 5, 6}, rng, -0.9, 0.9);
    return gradcheck([&] { return grid_sample(img, field); }, {img, field});
  });
  add_case("apply_control_grid", [] {
    std::mt19937_64 rng(107);
    Tensor img = random_tensor({1, 2, 6, 6}, rng);
    Tensor grid = identity_grid(3).values().clone();
    for (auto& v : grid.data()) v = Real(v * 0.8 + 0.05);
    grid.set_requires_grad();
    return gradcheck([&] { return apply(ControlGrid(grid), img); }, {grid, img});
  });
  add_case("adain_blend", [] {
    std::mt19937_64 rng(108);
    Tensor fa = random_tensor({2, 2, 3, 3}, rng), fb = random_tensor({2, 2, 3, 3}, rng);
    const std::vector<Real> t{0.3, 0.8};
    return gradcheck([&] { return concat_batch({adain_blend(fa, fb, t).a, adain_blend(fa, fb, t).b}); }, {fa, fb});
  });

  // Losses.
  add_case("lsgan_d", [] {
    std::mt19937_64 rng(110);
    Tensor rl = random_tensor({2, 1, 4, 4}, rng, 0, 1), rg = random_tensor({2, 1, 1, 1}, rng, 0, 1);
    Tensor fl = random_tensor({2, 1, 4, 4}, rng, 0, 1), fg = random_tensor({2, 1, 1, 1}, rng, 0, 1);
    return gradcheck([&] { return lsgan_d({rl, rg}, {fl, fg}); }, {rl, rg, fl, fg});
  });
  add_case("lsgan_g", [] {
    std::mt19937_64 rng(111);
    Tensor fl = random_tensor({2, 1, 4, 4}, rng, 0, 1), fg = random_tensor({2, 1, 1, 1}, rng, 0, 1);
    return gradcheck([&] { return lsgan_g({fl, fg}); }, {fl, fg});
  });
  add_case("transition_loss", [] {
    const auto ext = random_extractor(112, gradient_extractor_spec());
    std::mt19937_64 rng(112);
    const Tensor a = random_tensor({1, 3, 32, 32}, rng, -1, 1, false), b = random_tensor({1, 3, 32, 32}, rng, -1, 1, false);
    Tensor frames = random_tensor({3, 3, 32, 32}, rng);
    const TimeSchedule s = dual_schedule({0, Real(0.4), 1}, {0, Real(0.6), 1});
    return gradcheck([&] { return transition_loss(ext, frames, a, b, {s}); }, {frames});
  });
  add_case("recon_loss", [] {
    std::mt19937_64 rng(113);
    Tensor f = random_tensor({2, 3, 4, 4}, rng), l = random_tensor({2, 3, 4, 4}, rng);
    const Tensor a = random_tensor({2, 3, 4, 4}, rng, -1, 1, false), b = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
    return gradcheck([&] { return recon_loss(f, l, a, b); }, {f, l});
  });
  add_case("warp_loss", [] {
    const auto ext = random_extractor(114, gradient_extractor_spec());
    std::mt19937_64 rng(114);
    Tensor warped = random_tensor({1, 3, 32, 32}, rng);
    const Tensor target = random_tensor({1, 3, 32, 32}, rng, -1, 1, false);
    return gradcheck([&] { return warp_loss(ext, warped, target); }, {warped});
  });
  add_case("identity_reg", [] {
    std::mt19937_64 rng(115);
    Tensor g = random_tensor({2, 2, 3, 3}, rng);
    return gradcheck([&] { return identity_reg(ControlGrid(g)); }, {g});
  });
  add_case("endpoint_blend_loss", [] {
    const auto ext = random_extractor(116, gradient_extractor_spec());
    std::mt19937_64 rng(116);
    Tensor frames = random_tensor({3, 3, 16, 16}, rng), a_seq = random_tensor({3, 3, 16, 16}, rng);
    Tensor b_seq = random_tensor({3, 3, 16, 16}, rng);
    const TimeSchedule s = dual_schedule({0, Real(0.5), 1}, {0, Real(0.3), 1});
    return gradcheck([&] { return endpoint_blend_loss(ext, frames, a_seq, b_seq, {s}); }, {frames, a_seq, b_seq});
  });
  add_case("total_g", [] {
    std::mt19937_64 rng(117);
    std::vector<Tensor> parts;
    for (int i = 0; i < 6; ++i) parts.push_back(random_tensor({}, rng, 0, 1));
    LossWeights w;
    return gradcheck([&] { return total_g({parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]}, w); }, parts);
  });
  return cases;
}

}  // namespace morph_test
