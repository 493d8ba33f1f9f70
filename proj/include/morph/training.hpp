#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "morph/archive.hpp"
#include "morph/config.hpp"
#include "morph/data.hpp"

MORPH_BEGIN_NAMESPACE

struct PairIndex {
  std::size_t a, b;
};

// Pairs every batch index with a partner drawn uniformly from the other
// set_size - 1 items.
std::vector<PairIndex> make_pairs(std::span<const std::size_t> batch, std::size_t set_size, Rng& rng);
// k indices drawn uniformly (with replacement) from [0, set_size).
std::vector<std::size_t> draw_real_pool(std::size_t set_size, int k, Rng& rng);
// `batch` distinct indices when the set is large enough, else with repeats.
std::vector<std::size_t> sample_batch(std::size_t set_size, int batch, Rng& rng);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loss values of one optimization step. Disabled terms are reported as 0.
struct StepMetrics {
  std::int64_t step = 0;
  double d_loss = 0, adv_g = 0, transition = 0, recon = 0, warp = 0, identity = 0, endpoint = 0, total = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const Generator& generator() const { return generator_; }
  const StnHead& stn() const { return stn_; }
  const Discriminators& discriminators() const { return disc_; }
  const FeatureExtractor& extractor() const { return extractor_; }
  std::int64_t steps_done() const { return step_; }

  // Generator parameters plus the STN when it is enabled.
  ParameterList g_parameters() const;
  ParameterList d_parameters() const { return disc_.parameters(); }

  // STN used for inference, or nullptr when disabled.
  const StnHead* active_stn() const { return config_.weights.use_stn ? &stn_ : nullptr; }
  // Schedules for one training step (uniform, or random dual-axis in
  // content/style mode).
  std::vector<TimeSchedule> draw_schedules(std::size_t pairs);

  // One D step then one G step. a, b: [P,3,H,W]; real_pool: [P*k,3,H,W].
  StepMetrics train_step(const Tensor& a, const Tensor& b, const Tensor& real_pool,
                         const std::vector<TimeSchedule>& schedules);
  // Samples a batch, pairs and real pools from `data` and calls train_step.
  StepMetrics step(const Dataset& data);

  // Frames of one pair at the given schedule: [k,3,H,W].
  Tensor morph(const Tensor& a, const Tensor& b, const TimeSchedule& schedule) const;

  // Parameters, optimizer state, step counter and sampling RNG.
  Archive checkpoint() const;
  static Trainer from_checkpoint(const Archive& archive);

 private:
  TrainConfig config_;
  Rng init_rng_;
  Rng rng_;
  FeatureExtractor extractor_;
  Generator generator_;
  StnHead stn_;
  Discriminators disc_;
  Adam opt_g_, opt_d_;
  std::int64_t step_ = 0;
};

// Toy renders or the configured folder, split by test_fraction.
Split load_training_data(const TrainConfig& config);

struct FitResult {
  Trainer trainer;
  std::vector<StepMetrics> history;
};

// Trains for config.steps (or epochs) on `train`. When config.write_files is
// set, writes metrics.csv, periodic ckpt_<step>.morph and final.morph under
// out_dir.
FitResult fit(const TrainConfig& config, const Dataset& train,
              const std::function<void(const StepMetrics&)>& on_step = {});

MORPH_END_NAMESPACE
