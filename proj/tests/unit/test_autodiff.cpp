#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "morph/nn.hpp"
#include "test_support.hpp"

using namespace morph;
using namespace morph_test;

namespace {
constexpr double kTol = 1e-4;
}

TEST_CASE("tensor construction checks shape against data") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<Real>{1, 2, 3}), ShapeError);
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(Tensor::scalar(3).item() == 3);
  CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("conv2d identity kernel and full-window sum") {
  Tensor x({1, 1, 3, 3}, std::vector<Real>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 1, 1}, std::vector<Real>{1});
  CHECK(conv2d(x, k, Tensor(), 1, 0).values() == x.values());

  Tensor x2({1, 1, 2, 2}, std::vector<Real>{1, 2, 3, 4});
  Tensor ones({1, 1, 2, 2}, Real(1));
  const Tensor y = conv2d(x2, ones, Tensor(), 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 10);
}

TEST_CASE("conv2d output extents and shape errors") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({2, 3, 9, 7}, rng);
  const Tensor k = random_tensor({4, 3, 3, 3}, rng);
  CHECK(conv2d(x, k, Tensor(), 2, 1).shape() == Shape{2, 4, 5, 4});
  const Tensor bad = random_tensor({4, 2, 3, 3}, rng);
  CHECK_THROWS_AS(conv2d(x, bad, Tensor(), 1, 0), ShapeError);
  const Tensor huge = random_tensor({1, 3, 12, 12}, rng);
  CHECK_THROWS_AS(conv2d(x, huge, Tensor(), 1, 0), ShapeError);
}

TEST_CASE("conv_transpose2d unit kernel is the identity and extents follow the formula") {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({1, 2, 4, 5}, rng, -1, 1, false);
  Tensor k({2, 2, 1, 1}, std::vector<Real>{1, 0, 0, 1});
  CHECK(conv_transpose2d(x, k, Tensor(), 1, 0).values() == x.values());
  const Tensor k4 = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
  CHECK(conv_transpose2d(x, k4, Tensor(), 2, 1).shape() == Shape{1, 3, 8, 10});
}

TEST_CASE("elementwise forward values") {
  Tensor x({3}, std::vector<Real>{-1, 0, 2});
  CHECK(relu(x).values() == std::vector<Real>{0, 0, 2});
  CHECK(mse(x, x).item() == 0);
  CHECK(sigmoid(Tensor::scalar(0)).item() == doctest::Approx(0.5));
  CHECK_THROWS_AS(sqrt(x), NumericError);
  CHECK_THROWS_AS(mse(x, Tensor({2})), ShapeError);
  CHECK_THROWS_AS(max_of({}), std::invalid_argument);
}

TEST_CASE("fill_map and concat_channels") {
  const Tensor m = fill_map(Real(0.25), 3, 4);
  CHECK(m.shape() == Shape{1, 3, 4});
  for (Real v : m.values()) CHECK(v == Real(0.25));
  const std::vector<Real> t{0, 1};
  const Tensor planes = fill_map(t, 2, 2);
  CHECK(planes.shape() == Shape{2, 1, 2, 2});
  std::mt19937_64 rng(3);
  const Tensor a = random_tensor({2, 3, 2, 2}, rng);
  const Tensor c = concat_channels({a, planes});
  CHECK(c.shape() == Shape{2, 4, 2, 2});
  // Sample 1: three copied channels then the constant plane of value 1.
  for (int i = 0; i < 12; ++i) CHECK(c.values()[16 + i] == a.values()[12 + i]);
  for (int i = 0; i < 4; ++i) CHECK(c.values()[16 + 12 + i] == 1);
}

TEST_CASE("instance_stats closed forms") {
  Tensor constant({1, 1, 2, 2}, Real(3));
  auto s = instance_stats(constant);
  CHECK(s.mean.item() == doctest::Approx(3));
  CHECK(s.sigma.item() == doctest::Approx(std::sqrt(kInstanceEps)).epsilon(1e-12));
  Tensor pair({1, 1, 1, 2}, std::vector<Real>{0, 2});
  s = instance_stats(pair);
  CHECK(s.mean.item() == doctest::Approx(1));
  CHECK(s.sigma.item() == doctest::Approx(std::sqrt(1 + kInstanceEps)).epsilon(1e-12));
}

TEST_CASE("bilinear_upsample closed forms") {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({1, 2, 3, 3}, rng);
  CHECK(max_abs_diff(bilinear_upsample(x, 3, 3).values(), x.values()) < 1e-12);
  Tensor one({1, 1, 1, 1}, Real(0.7));
  const Tensor up = bilinear_upsample(one, 4, 5);
  for (Real v : up.values()) CHECK(v == doctest::Approx(0.7));
  Tensor corners({1, 1, 2, 2}, std::vector<Real>{1, 2, 3, 6});
  CHECK(bilinear_upsample(corners, 3, 3).values()[4] == doctest::Approx(3.0));
}

TEST_CASE("backward populates every reachable leaf and consumes the tape") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({4}, rng), b = random_tensor({4}, rng);
  Tensor unused = random_tensor({4}, rng);
  const Tensor loss = sum(mul(add(a, b), a));
  backward(loss);
  REQUIRE(a.has_grad());
  REQUIRE(b.has_grad());
  CHECK_FALSE(unused.has_grad());
  for (int i = 0; i < 4; ++i) {
    CHECK(a.grad()[i] == doctest::Approx(2 * a.values()[i] + b.values()[i]));
    CHECK(b.grad()[i] == doctest::Approx(a.values()[i]));
  }
  CHECK(loss.is_leaf());
}

TEST_CASE("shared subexpressions accumulate gradients once per use") {
  Tensor x({1}, std::vector<Real>{3});
  x.set_requires_grad();
  const Tensor y = square(x);
  backward(sum(add(y, y)));
  CHECK(x.grad()[0] == doctest::Approx(12));
}

TEST_CASE("no-grad guard records nothing") {
  std::mt19937_64 rng(6);
  Tensor a = random_tensor({3}, rng);
  Tensor out;
  {
    NoGradGuard guard;
    out = relu(a);
  }
  CHECK_FALSE(out.requires_grad());
  CHECK(relu(a).requires_grad());
}

TEST_CASE("non-finite forward results are errors") {
  Tensor big({1}, std::vector<Real>{Real(1e300)});
  CHECK_THROWS_AS(square(big), NumericError);
  Tensor zero({1}, std::vector<Real>{0});
  CHECK_THROWS_AS(div(Tensor({1}, Real(1)), zero), NumericError);
}

TEST_CASE("max_of routes the gradient to the first argmax") {
  Tensor a = Tensor::scalar(2), b = Tensor::scalar(5), c = Tensor::scalar(5);
  a.set_requires_grad();
  b.set_requires_grad();
  c.set_requires_grad();
  const Tensor m = max_of({a, b, c});
  CHECK(m.item() == 5);
  backward(m);
  CHECK((!a.has_grad() || a.grad()[0] == 0));
  CHECK(b.grad()[0] == 1);
  CHECK((!c.has_grad() || c.grad()[0] == 0));
}

TEST_CASE("finite differences: elementwise ops") {
  std::mt19937_64 rng(10);
  const Shape s{2, 3, 2, 2};
  Tensor x = random_away_from_zero(s, rng), y = random_away_from_zero(s, rng);
  Tensor pos = random_tensor(s, rng, 0.5, 2.0);
  CHECK(gradcheck([&] { return relu(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return sigmoid(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return tanh(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return sqrt(pos); }, {pos}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return square(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return abs(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return add(x, y); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return sub(x, y); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return mul(x, y); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return div(x, pos); }, {x, pos}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return scale(x, Real(-1.5)); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return add_scalar(x, Real(0.3)); }, {x}).max_rel_error < kTol);
  const std::vector<Real> f{0.25, -2.0};
  CHECK(gradcheck([&] { return scale_rows(x, f); }, {x}).max_rel_error < kTol);
}

TEST_CASE("finite differences: reductions and selection") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({2, 3, 2, 2}, rng), y = random_tensor({2, 3, 2, 2}, rng);
  CHECK(gradcheck([&] { return sum(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return mean(x); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return mse(x, y); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return mse_rows(x, y); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return pick(x, 7); }, {x}).max_rel_error < kTol);
  Tensor a = Tensor::scalar(0.1), b = Tensor::scalar(0.9), c = Tensor::scalar(-0.4);
  for (Tensor* t : {&a, &b, &c}) t->set_requires_grad();
  CHECK(gradcheck([&] { return max_of({a, b, c}); }, {a, b, c}).max_rel_error < kTol);
}

TEST_CASE("finite differences: shape ops") {
  std::mt19937_64 rng(12);
  Tensor x = random_tensor({3, 2, 2, 2}, rng), y = random_tensor({3, 1, 2, 2}, rng);
  Tensor z = random_tensor({2, 2, 2, 2}, rng);
  CHECK(gradcheck([&] { return reshape(x, {6, 4}); }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return concat_channels({x, y}); }, {x, y}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return concat_batch({x, z}); }, {x, z}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return slice_batch(x, 1, 2); }, {x}).max_rel_error < kTol);
  const std::vector<std::int64_t> idx{2, 0, 2};
  CHECK(gradcheck([&] { return gather_batch(x, idx); }, {x}).max_rel_error < kTol);
}

TEST_CASE("finite differences: normalization ops") {
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({2, 3, 3, 3}, rng);
  Tensor gain = random_tensor({2, 3}, rng), shift = random_tensor({2, 3}, rng);
  CHECK(gradcheck([&] { return instance_stats(x).mean; }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return instance_stats(x).sigma; }, {x}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return channel_affine(x, gain, shift); }, {x, gain, shift}).max_rel_error < kTol);
  CHECK(gradcheck([&] { return spatial_mean(x); }, {x}).max_rel_error < kTol);
}

TEST_CASE("finite differences: conv2d, conv_transpose2d, linear") {
  std::mt19937_64 rng(14);
  Tensor x = random_tensor({2, 3, 8, 8}, rng);
  Tensor k = random_tensor({4, 3, 3, 3}, rng), bias = random_tensor({4}, rng);
  CHECK(gradcheck([&] { return conv2d(x, k, bias, 1, 1); }, {x, k, bias}).max_rel_error < kTol);
  Tensor k4 = random_tensor({4, 3, 4, 4}, rng);
  CHECK(gradcheck([&] { return conv2d(x, k4, bias, 2, 1); }, {x, k4, bias}).max_rel_error < kTol);

  Tensor small = random_tensor({2, 3, 4, 4}, rng);
  Tensor kt = random_tensor({3, 2, 4, 4}, rng), bt = random_tensor({2}, rng);
  CHECK(gradcheck([&] { return conv_transpose2d(small, kt, bt, 2, 1); }, {small, kt, bt}).max_rel_error < kTol);

  Tensor v = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
  CHECK(gradcheck([&] { return linear(v, w, b); }, {v, w, b}).max_rel_error < kTol);
}

TEST_CASE("finite differences: spatial resampling") {
  std::mt19937_64 rng(15);
  Tensor img = random_tensor({2, 2, 5, 6}, rng);
  Tensor field = random_tensor({2, 2, 5, 6}, rng, -0.9, 0.9);
  CHECK(gradcheck([&] { return grid_sample(img, field); }, {img, field}).max_rel_error < kTol);
  Tensor coarse = random_tensor({1, 2, 3, 3}, rng);
  CHECK(gradcheck([&] { return bilinear_upsample(coarse, 7, 5); }, {coarse}).max_rel_error < kTol);
  Tensor pool_in = random_tensor({2, 2, 4, 6}, rng);
  CHECK(gradcheck([&] { return max_pool2(pool_in); }, {pool_in}).max_rel_error < kTol);
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  std::vector<Real> p{0.5};
  std::vector<Real> g{0};
  AdamMoments st;
  for (int s = 1; s <= 10; ++s) adam_step(p, g, st, s, {});
  CHECK(p[0] == 0.5);
}

TEST_CASE("adam: first step moves by lr against the gradient sign") {
  // With bias correction, m_hat = g and v_hat = g^2, so the step is
  // lr * g / (|g| + eps).
  for (double g0 : {3.0, -0.01}) {
    std::vector<Real> p{1.0};
    std::vector<Real> g{static_cast<Real>(g0)};
    AdamMoments st;
    AdamHyper hp;
    adam_step(p, g, st, 1, hp);
    const double expected = 1.0 - hp.lr * g0 / (std::abs(g0) + hp.eps);
    CHECK(double(p[0]) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("adam: constant gradient keeps moving against its sign") {
  std::vector<Real> p{0.0};
  std::vector<Real> g{-2.0};
  AdamMoments st;
  double prev = 0;
  for (int s = 1; s <= 50; ++s) {
    adam_step(p, g, st, s, {});
    CHECK(double(p[0]) > prev);
    prev = p[0];
  }
}
