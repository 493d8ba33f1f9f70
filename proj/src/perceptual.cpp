#include "morph/perceptual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "morph/archive.hpp"

MORPH_BEGIN_NAMESPACE

LayerGroupSet::LayerGroupSet(std::initializer_list<int> groups)
    : LayerGroupSet(std::vector<int>(groups)) {}

LayerGroupSet::LayerGroupSet(const std::vector<int>& groups) : groups_(groups) {
  std::sort(groups_.begin(), groups_.end());
  groups_.erase(std::unique(groups_.begin(), groups_.end()), groups_.end());
  if (groups_.empty()) throw std::invalid_argument("layer group set must be nonempty");
  if (groups_.front() < 1 || groups_.back() > kNumLayerGroups)
    throw std::invalid_argument("layer groups must lie in 1..5");
}

bool LayerGroupSet::contains(int g) const {
  return std::binary_search(groups_.begin(), groups_.end(), g);
}

FeatureExtractor::FeatureExtractor(const ExtractorSpec& spec, std::vector<std::vector<Conv2d>> layers)
    : spec_(spec), layers_(std::move(layers)) {
  if (layers_.size() != kNumLayerGroups) throw std::invalid_argument("extractor needs five layer groups");
  for (auto& group : layers_)
    for (auto& conv : group) {
      conv.weight.set_requires_grad(false);
      conv.bias.set_requires_grad(false);
    }
}

FeaturePyramid FeatureExtractor::pyramid(const Tensor& image, int max_group) const {
  if (image.ndim() != 4 || image.dim(1) != 3)
    throw ShapeError("extract: expected an [N,3,H,W] image, got " + shape_str(image.shape()));
  if (max_group < 1 || max_group > kNumLayerGroups) throw std::invalid_argument("extract: bad group");
  const std::int64_t div = std::int64_t{1} << max_group;
  if (image.dim(2) % div || image.dim(3) % div)
    throw ShapeError("extract: spatial size " + std::to_string(image.dim(2)) + "x" +
                     std::to_string(image.dim(3)) + " is not divisible by 2^" + std::to_string(max_group));
  FeaturePyramid out;
  Tensor x = image;
  for (int g = 0; g < max_group; ++g) {
    for (const auto& conv : layers_[static_cast<std::size_t>(g)]) x = relu(conv(x));
    x = max_pool2(x);
    out.groups.push_back(x);
  }
  return out;
}

std::vector<Tensor> FeatureExtractor::extract(const Tensor& image, const LayerGroupSet& groups) const {
  const auto pyr = pyramid(image, groups.max());
  std::vector<Tensor> out;
  for (int g : groups.list()) out.push_back(pyr.at(g));
  return out;
}

ParameterList FeatureExtractor::parameters() const {
  ParameterList out;
  for (std::size_t g = 0; g < layers_.size(); ++g)
    for (std::size_t c = 0; c < layers_[g].size(); ++c)
      layers_[g][c].collect("ext.g" + std::to_string(g + 1) + ".c" + std::to_string(c + 1), out);
  return out;
}

FeatureExtractor random_extractor(std::uint64_t seed, const ExtractorSpec& spec) {
  Rng rng(seed);
  std::vector<std::vector<Conv2d>> layers(kNumLayerGroups);
  std::int64_t in = 3;
  for (int g = 0; g < kNumLayerGroups; ++g) {
    if (spec.convs_per_group[static_cast<std::size_t>(g)] < 1)
      throw std::invalid_argument("each layer group needs at least one conv");
    for (int c = 0; c < spec.convs_per_group[static_cast<std::size_t>(g)]; ++c) {
      const auto out = spec.widths[static_cast<std::size_t>(g)];
      // He initialization keeps activation scale stable through ReLU stacks.
      layers[static_cast<std::size_t>(g)].emplace_back(in, out, 3, 1, 1, std::sqrt(2.0 / double(in * 9)), rng,
                                                      false);
      in = out;
    }
  }
  return FeatureExtractor(spec, std::move(layers));
}

FeatureExtractor load_weights(const std::string& archive_path) {
  const Archive ar = load_archive(archive_path);
  ExtractorSpec spec;
  std::vector<std::vector<Conv2d>> layers(kNumLayerGroups);
  std::int64_t in = 3;
  for (int g = 1; g <= kNumLayerGroups; ++g) {
    int c = 1;
    for (;; ++c) {
      const std::string prefix = "ext.g" + std::to_string(g) + ".c" + std::to_string(c);
      const Tensor* w = ar.find(prefix + ".weight");
      if (!w) break;
      const Tensor& b = ar.at(prefix + ".bias");
      if (w->ndim() != 4 || w->dim(1) != in || w->dim(2) != 3 || w->dim(3) != 3)
        throw std::runtime_error(prefix + ".weight has shape " + shape_str(w->shape()) + ", expected [*," +
                                 std::to_string(in) + ",3,3]");
      if (b.ndim() != 1 || b.dim(0) != w->dim(0))
        throw std::runtime_error(prefix + ".bias does not match its weight");
      Conv2d conv;
      conv.weight = w->clone();
      conv.bias = b.clone();
      conv.stride = 1;
      conv.padding = 1;
      layers[static_cast<std::size_t>(g - 1)].push_back(conv);
      in = w->dim(0);
    }
    if (c == 1) throw std::runtime_error("weight archive has no convs for layer group " + std::to_string(g));
    spec.convs_per_group[static_cast<std::size_t>(g - 1)] = c - 1;
    spec.widths[static_cast<std::size_t>(g - 1)] = in;
  }
  return FeatureExtractor(spec, std::move(layers));
}

void save_weights(const FeatureExtractor& ext, const std::string& archive_path) {
  Archive ar;
  ar.meta["kind"] = "extractor";
  for (const auto& p : ext.parameters().items()) ar.tensors.push_back({p.name, p.tensor});
  save_archive(ar, archive_path);
}

Tensor ps_rows(const std::vector<Tensor>& a, const std::vector<Tensor>& b, PsAggregation agg) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("ps: feature lists differ in length");
  if (agg == PsAggregation::MeanOfGroups) {
    Tensor acc;
    for (std::size_t i = 0; i < a.size(); ++i) {
      Tensor m = mse_rows(a[i], b[i]);
      acc = acc.defined() ? add(acc, m) : m;
    }
    return a.size() == 1 ? acc : scale(acc, Real(1) / Real(a.size()));
  }
  // Concatenated: weight each group's MSE by its share of the features.
  std::int64_t total = 0;
  for (const auto& t : a) total += t.numel() / t.dim(0);
  Tensor acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real w = Real(a[i].numel() / a[i].dim(0)) / Real(total);
    Tensor m = scale(mse_rows(a[i], b[i]), w);
    acc = acc.defined() ? add(acc, m) : m;
  }
  return acc;
}

Tensor ps_rows(const FeaturePyramid& a, const FeaturePyramid& b, const LayerGroupSet& groups,
               PsAggregation agg) {
  std::vector<Tensor> fa, fb;
  for (int g : groups.list()) {
    fa.push_back(a.at(g));
    fb.push_back(b.at(g));
  }
  return ps_rows(fa, fb, agg);
}

Tensor ps(const FeatureExtractor& ext, const Tensor& a, const Tensor& b, const LayerGroupSet& groups,
          PsAggregation agg) {
  if (a.shape() != b.shape())
    throw ShapeError("ps: image shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  return mean(ps_rows(ext.extract(a, groups), ext.extract(b, groups), agg));
}

MORPH_END_NAMESPACE
