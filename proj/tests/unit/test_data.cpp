#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "morph/data.hpp"
#include "test_support.hpp"

using namespace morph;
using namespace morph_test;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("morph_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Tensor constant_image(std::int64_t res, Real v) { return Tensor::full({3, res, res}, v); }

}  // namespace

TEST_CASE("png values map onto [-1,1]") {
  const auto dir = scratch_dir("map");
  Tensor img({3, 1, 3});
  // Pixels 0, 128, 255 written through the inverse map.
  const Real px[3] = {-1, Real(128.0 / 255.0 * 2 - 1), 1};
  for (int c = 0; c < 3; ++c)
    for (int x = 0; x < 3; ++x) img.data()[c * 3 + x] = px[x];
  const auto path = (dir / "m.png").string();
  write_png(img, path);
  const Tensor back = read_png(path);
  REQUIRE(back.shape() == Shape{3, 1, 3});
  CHECK(back.values()[0] == -1);
  CHECK(double(back.values()[1]) == doctest::Approx(128.0 / 255.0 * 2 - 1).epsilon(1e-12));
  CHECK(double(back.values()[1]) == doctest::Approx(0.00392).epsilon(1e-3));
  CHECK(back.values()[2] == 1);
  fs::remove_all(dir);
}

TEST_CASE("png round trip changes values by less than one level") {
  const auto dir = scratch_dir("roundtrip");
  std::mt19937_64 rng(50);
  const Tensor img = random_tensor({3, 9, 11}, rng, -1, 1, false);
  const auto path = (dir / "r.png").string();
  write_png(img, path);
  const Tensor back = read_png(path);
  // One 8-bit level spans 2/255 in [-1,1]; rounding moves at most half of it.
  CHECK(max_abs_diff(back.values(), img.values()) < 1.0 / 255.0 + 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("load_folder counts, sorts, resizes and skips bad files") {
  const auto dir = scratch_dir("folder");
  for (int i = 0; i < 4; ++i) write_png(constant_image(16, Real(-1 + 0.5 * i)), (dir / ("img_" + std::to_string(i) + ".png")).string());
  {
    std::ofstream bad(dir / "broken.png");
    bad << "not a png";
  }
  std::ofstream(dir / "notes.txt") << "ignored";
  const Dataset d = load_folder(dir.string(), 8);
  REQUIRE(d.size() == 4);
  CHECK(d.resolution() == 8);
  for (std::size_t i = 0; i < 4; ++i) CHECK(double(d.items[i].values()[0]) == doctest::Approx(-1 + 0.5 * double(i)).epsilon(2.0 / 255));
  d.validate();

  const auto empty = scratch_dir("empty");
  CHECK_THROWS(load_folder(empty.string(), 8));
  CHECK_THROWS(load_folder((dir / "missing").string(), 8));
  fs::remove_all(dir);
  fs::remove_all(empty);
}

TEST_CASE("resize keeps constants and corners") {
  std::mt19937_64 rng(51);
  const Tensor img = random_tensor({3, 5, 7}, rng, -1, 1, false);
  const Tensor big = resize_image(img, 9, 13);
  CHECK(big.shape() == Shape{3, 9, 13});
  CHECK(big.values()[0] == img.values()[0]);
  CHECK(big.values()[9 * 13 - 1] == img.values()[5 * 7 - 1]);
  CHECK(max_abs_diff(resize_image(constant_image(4, Real(0.25)), 7, 7).values(),
                     constant_image(7, Real(0.25)).values()) < 1e-12);
}

TEST_CASE("gen_toy is deterministic and well formed") {
  const Dataset a = gen_toy(20, 3, 32), b = gen_toy(20, 3, 32), c = gen_toy(20, 4, 32);
  REQUIRE(a.size() == 20);
  bool differs = false;
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a.items[i].values() == b.items[i].values());
    differs = differs || a.items[i].values() != c.items[i].values();
    CHECK(a.items[i].shape() == Shape{3, 32, 32});
  }
  CHECK(differs);
  a.validate();
  for (const auto& img : a.items) {
    std::set<std::vector<Real>> colors;
    const auto& v = img.values();
    for (std::size_t p = 0; p < 32 * 32; ++p) colors.insert({v[p], v[1024 + p], v[2048 + p]});
    CHECK(colors.size() >= 2);
  }
}

TEST_CASE("toy shapes stay inside a two-pixel margin") {
  Rng rng(52);
  for (auto family : {ShapeFamily::Ellipse, ShapeFamily::RoundedRect, ShapeFamily::Polygon}) {
    for (int i = 0; i < 50; ++i) {
      const ShapeSpec s = sample_shape(family, rng);
      const Render r = render_shape(s, 32);
      const auto& v = r.image.values();
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x)
            if (y < 2 || y >= 30 || x < 2 || x >= 30)
              CHECK(double(v[(c * 32 + y) * 32 + x]) == doctest::Approx(s.background[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("mean ellipse area matches the sampling ranges") {
  // Area is pi * size^2 * aspect on a canvas of area 4, with size and aspect
  // independent uniforms.
  const ShapeRanges r;
  const double e_size2 = (std::pow(r.size_max, 3) - std::pow(r.size_min, 3)) / (3 * (r.size_max - r.size_min));
  const double e_aspect = 0.5 * (r.aspect_min + r.aspect_max);
  const double expected = std::numbers::pi * e_size2 * e_aspect / 4;
  Rng rng(53);
  double sum = 0, sum2 = 0, exact_sum = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const ShapeSpec s = sample_shape(ShapeFamily::Ellipse, rng);
    const double cov = render_shape(s, 32).coverage;
    sum += cov;
    sum2 += cov * cov;
    exact_sum += std::numbers::pi * s.size * s.size * s.aspect / 4;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean - expected) < 4 * sd / std::sqrt(double(n)) + 0.003);
  // Rasterized coverage tracks the analytic area of the same shapes.
  CHECK(std::abs(mean - exact_sum / n) < 0.003);
}

TEST_CASE("write_toy uses the documented layout") {
  const auto dir = scratch_dir("toy");
  const std::string out = write_toy(dir.string(), 3, 9, 32);
  CHECK(fs::path(out) == dir / "toy" / "9");
  CHECK(fs::exists(dir / "toy" / "9" / "img_00000.png"));
  CHECK(fs::exists(dir / "toy" / "9" / "img_00002.png"));
  const Dataset back = load_folder(out, 32);
  const Dataset ref = gen_toy(3, 9, 32);
  for (std::size_t i = 0; i < 3; ++i) CHECK(max_abs_diff(back.items[i].values(), ref.items[i].values()) < 1.0 / 255.0 + 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("split is disjoint, exhaustive and seeded") {
  Dataset d;
  for (int i = 0; i < 50; ++i) d.items.push_back(constant_image(2, Real(i) / 64));
  const Split s = split(d, 0.2, 7), again = split(d, 0.2, 7);
  CHECK(s.test.size() == 10);
  CHECK(s.train.size() == 40);
  std::set<Real> seen;
  for (const auto* part : {&s.train, &s.test})
    for (const auto& img : part->items) CHECK(seen.insert(img.values()[0]).second);
  CHECK(seen.size() == 50);
  for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(s.test.items[i].values() == again.test.items[i].values());
  CHECK(s.test.split == "test");
  CHECK_THROWS_AS(split(d, 1.5, 7), std::invalid_argument);
}

TEST_CASE("shape family names") {
  CHECK(parse_family("ellipse") == ShapeFamily::Ellipse);
  CHECK(parse_family("rounded-rect") == ShapeFamily::RoundedRect);
  CHECK(parse_family("polygon") == ShapeFamily::Polygon);
  CHECK(family_name(ShapeFamily::Polygon) == "polygon");
  CHECK_THROWS_AS(parse_family("star"), std::invalid_argument);
}
