#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "morph/data.hpp"
#include "morph/losses.hpp"
#include "morph/networks.hpp"
#include "morph/perceptual.hpp"

MORPH_BEGIN_NAMESPACE

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TrainMode { SingleAxis, ContentStyle };

/// Everything needed to build and train a model. Parsed from a flat
/// `key = value` file; see README for the key list.
struct TrainConfig {
  // Required.
  std::string data;     // folder of PNGs, or "toy"
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  std::string out_dir;

  std::int64_t epochs = 0;  // if > 0, overrides steps with ceil(n/batch) * epochs
  std::int64_t resolution = 32;
  int k = 5;
  int batch = 8;
  TrainMode mode = TrainMode::SingleAxis;
  AdamHyper adam;
  LossWeights weights;
  PsAggregation aggregation = PsAggregation::MeanOfGroups;

  std::int64_t enc_base = 64;
  std::int64_t d_base = 64;
  double init_std = 0.02;
  StnSpec stn;

  ExtractorSpec extractor;
  std::string extractor_weights;  // archive path; empty means random weights
  std::uint64_t extractor_seed = 7;

  std::size_t toy_count = 200;
  ShapeFamily toy_family = ShapeFamily::Ellipse;
  double test_fraction = 0.0;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  bool write_files = true;            // metrics CSV and checkpoints under out_dir

  bool content_style() const { return mode == TrainMode::ContentStyle; }
  NetworkSpec network() const;
  PsGroups ps_groups() const { return PsGroups::for_mode(content_style(), aggregation); }

  // Throws ConfigError on the first broken invariant.
  void validate() const;

  // Canonical (key, value) listing; parse(to_pairs()) round-trips.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  void set(const std::string& key, const std::string& value);

  static TrainConfig from_pairs(const std::map<std::string, std::string>& values);
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::string& path);
};

// Ablation variants: main, no-gan, no-local-ps, no-global-ps, no-recon,
// no-adain, no-stn.
const std::vector<std::string>& ablation_variants();
TrainConfig apply_variant(TrainConfig config, const std::string& variant);

MORPH_END_NAMESPACE
