#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "morph/nn.hpp"

MORPH_BEGIN_NAMESPACE

/// Images of one shape, each [3,H,W] with values in [-1,1].
struct Dataset {
  std::vector<Tensor> items;
  std::string split = "train";

  std::size_t size() const { return items.size(); }
  std::int64_t resolution() const { return items.empty() ? 0 : items.front().dim(1); }
  // Throws if empty, mixed shapes, or values outside [-1,1].
  void validate() const;
};

// Stacks [3,H,W] images into an [N,3,H,W] batch (no gradient history).
Tensor stack_images(const std::vector<Tensor>& images);
Tensor image_at(const Tensor& batch, std::int64_t index);

// 8-bit RGB PNG codec. Values map 0 -> -1, 255 -> 1.
Tensor read_png(const std::string& path);
void write_png(const Tensor& image, const std::string& path);
// Bilinear (align-corners) resize of a [3,h,w] image.
Tensor resize_image(const Tensor& image, std::int64_t h, std::int64_t w);

// Decodes <root>/*.png in filename order, resizing to resolution x resolution.
// Unreadable files are skipped with a warning on stderr.
Dataset load_folder(const std::string& root, std::int64_t resolution);

enum class ShapeFamily { Ellipse, RoundedRect, Polygon };

ShapeFamily parse_family(const std::string& name);
std::string family_name(ShapeFamily f);

/// Geometry and appearance of one toy render. Lengths are in normalized
/// canvas units where the canvas spans [-1,1] on both axes.
struct ShapeSpec {
  ShapeFamily family = ShapeFamily::Ellipse;
  double size = 0.45;       // major half-extent
  double aspect = 0.75;     // minor / major
  double rotation = 0.0;    // radians
  double cx = 0.0, cy = 0.0;
  int sides = 6;            // polygon only
  std::array<double, 3> fill{0.8, 0.2, -0.4};
  std::array<double, 3> background{-0.8, -0.8, -0.8};
  bool striped = false;
  double stripe_frequency = 0.0;  // cycles across the canvas
  double stripe_phase = 0.0;
};

struct ShapeRanges {
  double size_min = 0.3, size_max = 0.6;
  double aspect_min = 0.5, aspect_max = 1.0;
  double center_jitter = 0.1;
  int sides_min = 5, sides_max = 8;
  double corner_fraction = 0.25;  // rounded-rect corner radius / minor half-extent
};

ShapeSpec sample_shape(ShapeFamily family, Rng& rng, const ShapeRanges& ranges = {});

struct Render {
  Tensor image;     // [3,res,res]
  double coverage;  // fraction of the canvas covered by the shape
};
Render render_shape(const ShapeSpec& spec, std::int64_t resolution, const ShapeRanges& ranges = {});

// n deterministic renders of a single shape family.
Dataset gen_toy(std::size_t n, std::uint64_t seed, std::int64_t resolution,
                ShapeFamily family = ShapeFamily::Ellipse);
// Writes <out_root>/toy/<seed>/img_%05d.png and returns the directory.
std::string write_toy(const std::string& out_root, std::size_t n, std::uint64_t seed, std::int64_t resolution,
                      ShapeFamily family = ShapeFamily::Ellipse);

struct Split {
  Dataset train, test;
};
// Seeded shuffle into disjoint train/test parts covering the input.
Split split(const Dataset& data, double test_fraction, std::uint64_t seed);

MORPH_END_NAMESPACE
