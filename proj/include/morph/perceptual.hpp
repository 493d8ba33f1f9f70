#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "morph/nn.hpp"

MORPH_BEGIN_NAMESPACE

inline constexpr int kNumLayerGroups = 5;

/// Nonempty subset of the extractor's layer groups {1..5}.
class LayerGroupSet {
 public:
  LayerGroupSet(std::initializer_list<int> groups);
  explicit LayerGroupSet(const std::vector<int>& groups);

  const std::vector<int>& list() const { return groups_; }
  int max() const { return groups_.back(); }
  bool contains(int g) const;

 private:
  std::vector<int> groups_;  // ascending, unique
};

struct ExtractorSpec {
  std::array<std::int64_t, kNumLayerGroups> widths{64, 128, 256, 512, 512};
  std::array<int, kNumLayerGroups> convs_per_group{2, 2, 3, 3, 3};
};

enum class PsAggregation {
  MeanOfGroups,  // unweighted mean of per-group MSE
  Concatenated,  // one MSE over all features of the requested groups
};

/// Features of one image batch for groups 1..depth(); group g at index g-1.
struct FeaturePyramid {
  std::vector<Tensor> groups;
  const Tensor& at(int g) const { return groups.at(static_cast<std::size_t>(g - 1)); }
  int depth() const { return static_cast<int>(groups.size()); }
};

/// Frozen VGG-shaped hierarchy: per group, 3x3 conv+ReLU blocks then 2x2 max
/// pooling. Group g output is input size / 2^g. Immutable after construction.
class FeatureExtractor {
 public:
  FeatureExtractor(const ExtractorSpec& spec, std::vector<std::vector<Conv2d>> layers);

  const ExtractorSpec& spec() const { return spec_; }
  // Runs groups 1..max_group. Gradients reach `image`, never the weights.
  FeaturePyramid pyramid(const Tensor& image, int max_group) const;
  std::vector<Tensor> extract(const Tensor& image, const LayerGroupSet& groups) const;

  ParameterList parameters() const;
  std::uint64_t hash() const { return parameters().hash(); }

 private:
  ExtractorSpec spec_;
  std::vector<std::vector<Conv2d>> layers_;
};

FeatureExtractor random_extractor(std::uint64_t seed, const ExtractorSpec& spec = {});
// Weights named ext.g<group>.c<index>.{weight,bias}; the spec is inferred.
FeatureExtractor load_weights(const std::string& archive_path);
void save_weights(const FeatureExtractor& ext, const std::string& archive_path);

// Per-sample PS between two pyramids: [N].
Tensor ps_rows(const FeaturePyramid& a, const FeaturePyramid& b, const LayerGroupSet& groups,
               PsAggregation agg = PsAggregation::MeanOfGroups);
// Same for already-extracted maps of the requested groups (ascending order).
Tensor ps_rows(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
               PsAggregation agg = PsAggregation::MeanOfGroups);

/// Perceptual similarity of two image batches: scalar, averaged over samples.
Tensor ps(const FeatureExtractor& ext, const Tensor& a, const Tensor& b, const LayerGroupSet& groups,
          PsAggregation agg = PsAggregation::MeanOfGroups);

MORPH_END_NAMESPACE
