#include "morph/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "morph/ops.hpp"

MORPH_BEGIN_NAMESPACE

namespace fs = std::filesystem;

void Dataset::validate() const {
  if (items.empty()) throw std::invalid_argument("dataset is empty");
  const Shape& ref = items.front().shape();
  if (ref.size() != 3 || ref[0] != 3) throw std::invalid_argument("dataset items must be [3,H,W]");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != ref)
      throw std::invalid_argument("dataset item " + std::to_string(i) + " has shape " +
                                  shape_str(items[i].shape()) + ", expected " + shape_str(ref));
    for (Real v : items[i].values())
      if (!(v >= Real(-1) && v <= Real(1)))
        throw std::invalid_argument("dataset item " + std::to_string(i) + " has values outside [-1,1]");
  }
}

Tensor stack_images(const std::vector<Tensor>& images) {
  if (images.empty()) throw ShapeError("stack_images: empty list");
  Shape shape = images.front().shape();
  std::vector<Real> data;
  data.reserve(images.size() * images.front().values().size());
  for (const auto& im : images) {
    if (im.shape() != shape) throw ShapeError("stack_images: mixed image shapes");
    data.insert(data.end(), im.values().begin(), im.values().end());
  }
  shape.insert(shape.begin(), static_cast<std::int64_t>(images.size()));
  return Tensor(shape, std::move(data));
}

Tensor image_at(const Tensor& batch, std::int64_t index) {
  const auto row = batch.numel() / batch.dim(0);
  std::vector<Real> v(batch.values().begin() + index * row, batch.values().begin() + (index + 1) * row);
  return Tensor(Shape(batch.shape().begin() + 1, batch.shape().end()), std::move(v));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw std::runtime_error("'" + path + "' is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }
  std::vector<unsigned char> pixels;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("corrupt PNG '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != width * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG layout in '" + path + "'");
  }
  pixels.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({3, static_cast<std::int64_t>(height), static_cast<std::int64_t>(width)});
  auto d = out.data();
  const std::size_t plane = std::size_t(width) * height;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      d[c * plane + p] = static_cast<Real>(double(pixels[p * 3 + c]) / 255.0 * 2.0 - 1.0);
  return out;
}

void write_png(const Tensor& image, const std::string& path) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw ShapeError("write_png: expected [3,H,W], got " + shape_str(image.shape()));
  const auto h = static_cast<png_uint_32>(image.dim(1)), w = static_cast<png_uint_32>(image.dim(2));
  std::vector<unsigned char> pixels(std::size_t(w) * h * 3);
  const std::size_t plane = std::size_t(w) * h;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = (double(image.values()[c * plane + p]) + 1.0) * 0.5 * 255.0;
      pixels[p * 3 + c] = static_cast<unsigned char>(std::clamp(std::lround(v), 0l, 255l));
    }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed for '" + path + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + std::size_t(y) * w * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor resize_image(const Tensor& image, std::int64_t h, std::int64_t w) {
  if (image.dim(1) == h && image.dim(2) == w) return image.detach();
  NoGradGuard guard;
  Tensor batch = reshape(image.detach(), {1, image.dim(0), image.dim(1), image.dim(2)});
  return reshape(bilinear_upsample(batch, h, w), {image.dim(0), h, w});
}

Dataset load_folder(const std::string& root, std::int64_t resolution) {
  if (!fs::is_directory(root)) throw std::runtime_error("'" + root + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Dataset out;
  for (const auto& p : files) {
    try {
      out.items.push_back(resize_image(read_png(p.string()), resolution, resolution));
    } catch (const std::exception& ex) {
      std::cerr << "warning: skipping " << p.string() << ": " << ex.what() << '\n';
    }
  }
  if (out.items.empty()) throw std::runtime_error("no usable PNG images in '" + root + "'");
  return out;
}

ShapeFamily parse_family(const std::string& name) {
  if (name == "ellipse") return ShapeFamily::Ellipse;
  if (name == "rounded-rect" || name == "rounded-rectangle") return ShapeFamily::RoundedRect;
  if (name == "polygon" || name == "n-gon") return ShapeFamily::Polygon;
  throw std::invalid_argument("unknown shape family '" + name + "' (ellipse, rounded-rect, polygon)");
}

std::string family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::Ellipse: return "ellipse";
    case ShapeFamily::RoundedRect: return "rounded-rect";
    case ShapeFamily::Polygon: return "polygon";
  }
  return "?";
}

ShapeSpec sample_shape(ShapeFamily family, Rng& rng, const ShapeRanges& r) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  ShapeSpec s;
  s.family = family;
  s.size = uni(r.size_min, r.size_max);
  s.aspect = uni(r.aspect_min, r.aspect_max);
  s.rotation = uni(0.0, std::numbers::pi);
  s.cx = uni(-r.center_jitter, r.center_jitter);
  s.cy = uni(-r.center_jitter, r.center_jitter);
  s.sides = r.sides_min + static_cast<int>(std::floor(u(rng) * (r.sides_max - r.sides_min + 1)));
  s.sides = std::min(s.sides, r.sides_max);
  const double bg = uni(-1.0, -0.5);
  for (auto& c : s.background) c = std::clamp(bg + uni(-0.1, 0.1), -1.0, 1.0);
  for (auto& c : s.fill) c = uni(-0.3, 1.0);
  // Keep the shape visibly brighter than the background.
  auto& top = *std::max_element(s.fill.begin(), s.fill.end());
  top = std::max(top, 0.4);
  s.striped = u(rng) < 0.5;
  s.stripe_frequency = uni(2.0, 5.0);
  s.stripe_phase = uni(0.0, 2.0 * std::numbers::pi);
  return s;
}

namespace {

bool inside(const ShapeSpec& s, const ShapeRanges& r, double x, double y) {
  const double a = s.size, b = s.size * s.aspect;
  switch (s.family) {
    case ShapeFamily::Ellipse: return (x * x) / (a * a) + (y * y) / (b * b) <= 1.0;
    case ShapeFamily::RoundedRect: {
      const double rad = r.corner_fraction * b;
      const double ax = std::abs(x), ay = std::abs(y);
      if (ax > a || ay > b) return false;
      const double qx = ax - (a - rad), qy = ay - (b - rad);
      return qx <= 0 || qy <= 0 || qx * qx + qy * qy <= rad * rad;
    }
    case ShapeFamily::Polygon: {
      const double py = y / s.aspect;
      const double rho = std::hypot(x, py);
      const double sector = 2.0 * std::numbers::pi / s.sides;
      double theta = std::atan2(py, x);
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      const double local = std::fmod(theta, sector) - sector / 2;
      return rho <= a * std::cos(sector / 2) / std::cos(local);
    }
  }
  return false;
}

}  // namespace

Render render_shape(const ShapeSpec& s, std::int64_t res, const ShapeRanges& ranges) {
  constexpr int kSuper = 4;
  Tensor image({3, res, res});
  auto d = image.data();
  const double cr = std::cos(s.rotation), sr = std::sin(s.rotation);
  std::array<double, 3> stripe_color;
  for (std::size_t c = 0; c < 3; ++c)
    stripe_color[c] = std::clamp(s.fill[c] > 0.3 ? s.fill[c] - 0.7 : s.fill[c] + 0.7, -1.0, 1.0);
  double covered = 0;
  for (std::int64_t py = 0; py < res; ++py)
    for (std::int64_t px = 0; px < res; ++px) {
      std::array<double, 3> acc{0, 0, 0};
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double u = -1.0 + 2.0 * (double(px) + (sx + 0.5) / kSuper) / double(res);
          const double v = -1.0 + 2.0 * (double(py) + (sy + 0.5) / kSuper) / double(res);
          const double dx = u - s.cx, dy = v - s.cy;
          const double lx = cr * dx + sr * dy, ly = -sr * dx + cr * dy;
          const std::array<double, 3>* color = &s.background;
          if (inside(s, ranges, lx, ly)) {
            ++hits;
            color = &s.fill;
            if (s.striped && std::sin(lx * s.stripe_frequency * std::numbers::pi + s.stripe_phase) < 0)
              color = &stripe_color;
          }
          for (std::size_t c = 0; c < 3; ++c) acc[c] += (*color)[c];
        }
      covered += double(hits) / (kSuper * kSuper);
      for (std::size_t c = 0; c < 3; ++c)
        d[(c * res + py) * res + px] = static_cast<Real>(acc[c] / (kSuper * kSuper));
    }
  return {image, covered / double(res * res)};
}

Dataset gen_toy(std::size_t n, std::uint64_t seed, std::int64_t resolution, ShapeFamily family) {
  Rng rng(seed);
  Dataset out;
  out.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.items.push_back(render_shape(sample_shape(family, rng), resolution).image);
  return out;
}

std::string write_toy(const std::string& out_root, std::size_t n, std::uint64_t seed, std::int64_t resolution,
                      ShapeFamily family) {
  const fs::path dir = fs::path(out_root) / "toy" / std::to_string(seed);
  fs::create_directories(dir);
  const Dataset data = gen_toy(n, seed, resolution, family);
  char name[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(name, sizeof name, "img_%05zu.png", i);
    write_png(data.items[i], (dir / name).string());
  }
  return dir.string();
}

Split split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0 || test_fraction > 1) throw std::invalid_argument("test fraction must lie in [0,1]");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * double(data.size())));
  Split s;
  s.train.split = "train";
  s.test.split = "test";
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_test ? s.test : s.train).items.push_back(data.items[order[i]]);
  return s;
}

MORPH_END_NAMESPACE
