#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "morph/eval.hpp"

using namespace morph;
namespace fs = std::filesystem;

namespace {

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  TrainConfig c = TrainConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

void run_training(const TrainConfig& c) {
  const Split data = load_training_data(c);
  std::cout << "training on " << data.train.size() << " images (" << c.resolution << "x" << c.resolution << ", "
            << kRealName << ")\n";
  const auto report_every = std::max<std::int64_t>(1, c.steps / 20);
  fit(c, data.train, [&](const StepMetrics& m) {
    if (m.step % report_every == 0) std::cout << "step " << m.step << "  total " << m.total << "  d " << m.d_loss << '\n';
  });
  std::cout << "wrote " << (fs::path(c.out_dir) / "metrics.csv").string() << " and "
            << (fs::path(c.out_dir) / "final.morph").string() << '\n';
}

Trainer load_model(const std::string& path) { return Trainer::from_checkpoint(load_archive(path)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned image morphing: training, inference and evaluation"};
  app.require_subcommand(1);

  std::string config_path, ckpt, a_path, b_path, out_dir = "out", test_dir, train_dir, variant, family = "ellipse";
  std::vector<std::string> overrides;
  int frames = 11, size = 6, pairs = 100, count = 200;
  std::int64_t resolution = 32;
  std::uint64_t seed = 0;
  bool full_cov = false;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--set", overrides, "Override a config entry (key=value)");

  auto* morph_cmd = app.add_subcommand("morph", "Generate a morphing sequence and montage");
  auto* csgrid = app.add_subcommand("csgrid", "Render a content/style grid");
  auto* blend = app.add_subcommand("blend", "Cross-dissolve the STN-warped inputs");
  for (auto* cmd : {morph_cmd, csgrid, blend}) {
    cmd->add_option("--ckpt", ckpt, "Checkpoint archive")->required()->check(CLI::ExistingFile);
    cmd->add_option("--a", a_path, "Source image (PNG)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--b", b_path, "Target image (PNG)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "Output directory");
  }
  morph_cmd->add_option("--frames", frames, "Number of frames")->check(CLI::Range(2, 10000));
  blend->add_option("--frames", frames, "Number of frames")->check(CLI::Range(2, 10000));
  csgrid->add_option("--size", size, "Cells per side")->check(CLI::Range(2, 64));

  auto* eval = app.add_subcommand("eval", "Fréchet and pacing report on a test folder");
  eval->add_option("--ckpt", ckpt, "Checkpoint archive")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test_dir, "Test image folder")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--train", train_dir, "Training image folder")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--pairs", pairs, "Number of test pairs")->check(CLI::PositiveNumber);
  eval->add_option("--frames", frames, "Frames per sequence")->check(CLI::Range(3, 10000));
  eval->add_option("--out", out_dir, "Report directory");
  eval->add_option("--seed", seed, "Pair sampling seed");
  eval->add_flag("--full-covariance", full_cov, "Use full covariance in the Fréchet distance");

  auto* ablate = app.add_subcommand("ablate", "Train one ablation variant");
  ablate->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--variant", variant, "Variant name")->required()->check(CLI::IsMember(ablation_variants()));
  ablate->add_option("--set", overrides, "Override a config entry (key=value)");

  auto* toy = app.add_subcommand("gen-toy", "Write a procedural toy-shape dataset");
  toy->add_option("--out", out_dir, "Root directory (images go to <out>/toy/<seed>)");
  toy->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  toy->add_option("--seed", seed, "Generator seed");
  toy->add_option("--resolution", resolution, "Image side");
  toy->add_option("--family", family, "ellipse | rounded-rect | polygon");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      run_training(load_config(config_path, overrides));
    } else if (*ablate) {
      TrainConfig c = apply_variant(load_config(config_path, overrides), variant);
      c.out_dir = (fs::path(c.out_dir) / variant).string();
      run_training(c);
    } else if (*morph_cmd) {
      const auto files = cmd_morph(load_model(ckpt), a_path, b_path, frames, out_dir);
      std::cout << "wrote " << files.size() << " frames and montage.png to " << out_dir << '\n';
    } else if (*csgrid) {
      cmd_csgrid(load_model(ckpt), a_path, b_path, size, out_dir);
      std::cout << "wrote " << size * size << " cells and grid.png to " << out_dir << '\n';
    } else if (*blend) {
      const auto files = cmd_blend(load_model(ckpt), a_path, b_path, frames, out_dir);
      std::cout << "wrote " << files.size() << " blended frames to " << out_dir << '\n';
    } else if (*eval) {
      EmbedOptions opt;
      if (full_cov) opt.covariance = Covariance::Full;
      const auto r = cmd_eval(load_model(ckpt), test_dir, train_dir, pairs, frames, out_dir, seed, opt);
      std::cout << "frechet " << r.frechet << "  pacing mean " << r.pacing.mean << "  max " << r.pacing.max
                << "  recon mse " << r.recon_mse << '\n';
    } else if (*toy) {
      std::cout << "wrote " << write_toy(out_dir, static_cast<std::size_t>(count), seed, resolution,
                                         parse_family(family))
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
