#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "morph/training.hpp"

MORPH_BEGIN_NAMESPACE

enum class Covariance { Diagonal, Full };

/// Gaussian moments of an embedded image set.
struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased sample covariance
};

// rows: one embedding per row; needs at least two rows.
GaussianFit fit_gaussian(const Eigen::MatrixXd& rows);

// Diagonal: |mu_x - mu_y|^2 + sum_c (sigma_x,c - sigma_y,c)^2 using only the
// covariance diagonals. Full: |mu_x - mu_y|^2 + tr(Sx + Sy - 2 (Sx^1/2 Sy Sx^1/2)^1/2).
double frechet_from_moments(const GaussianFit& x, const GaussianFit& y, Covariance mode = Covariance::Diagonal);
double frechet_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                        Covariance mode = Covariance::Diagonal);

struct EmbedOptions {
  int group = 4;
  std::int64_t size = 96;  // images are bilinearly resized to size x size first
  std::int64_t batch = 32;
  Covariance covariance = Covariance::Diagonal;
};

// Spatially averaged group activations, one row per image.
Eigen::MatrixXd embed(const FeatureExtractor& ext, const std::vector<Tensor>& images, const EmbedOptions& opt = {});
double frechet_distance(const FeatureExtractor& ext, const std::vector<Tensor>& x, const std::vector<Tensor>& y,
                        const EmbedOptions& opt = {});

struct PacingStats {
  std::vector<double> per_pair;  // max_i |PS(I_{i-1}, I_i) - dt_i * PS(I_A, I_B)|
  double mean = 0;               // mean of per_pair
  double max = 0;
};

// frames[p]: [k,3,H,W] sequence of pair p; a[p], b[p]: [3,H,W].
PacingStats pacing(const FeatureExtractor& ext, const std::vector<Tensor>& frames, const std::vector<Tensor>& a,
                   const std::vector<Tensor>& b, const TimeSchedule& schedule, const PsGroups& groups = {});

// Frames side by side: [3,H,n*W].
Tensor montage(const Tensor& frames);
// Writes frame_000.png .. and montage.png; returns the frame paths.
std::vector<std::string> write_sequence(const Tensor& frames, const std::string& out_dir);

// Generated sequence of n evenly spaced frames: [n,3,H,W].
Tensor morph_frames(const Trainer& model, const Tensor& a, const Tensor& b, int n_frames);
std::vector<std::string> cmd_morph(const Trainer& model, const std::string& a_path, const std::string& b_path,
                                   int n_frames, const std::string& out_dir);

// size^2 cells; cell (row j, column i) has content i/(size-1) and style
// j/(size-1), so each row holds the style coordinate constant. Returns
// [size*size,3,H,W] in row-major cell order.
Tensor csgrid_cells(const Trainer& model, const Tensor& a, const Tensor& b, int size);
// Writes cell_rRR_cCC.png for every cell and the assembled grid.png.
Tensor cmd_csgrid(const Trainer& model, const std::string& a_path, const std::string& b_path, int size,
                  const std::string& out_dir);

// (1 - t_i) I_A^{t_i} + t_i I_B^{t_i} from the STN warps only; identity warps
// when stn is null.
Tensor blend_frames(const StnHead* stn, const Tensor& a, const Tensor& b, int n_frames);
std::vector<std::string> cmd_blend(const Trainer& model, const std::string& a_path, const std::string& b_path,
                                   int n_frames, const std::string& out_dir);

struct EvalReport {
  int pairs = 0;
  int frames = 0;
  double frechet = 0;  // interior frames vs training images
  PacingStats pacing;
  double recon_mse = 0;  // mean of MSE(I_1, I_A) and MSE(I_k, I_B)
};

// Samples `pairs` distinct-image pairs from `test`, generates `frames`-frame
// sequences and scores their interior frames against `train`.
EvalReport evaluate(const Trainer& model, const Dataset& test, const Dataset& train, int pairs, int frames,
                    std::uint64_t seed, const EmbedOptions& opt = {});
EvalReport cmd_eval(const Trainer& model, const std::string& test_dir, const std::string& train_dir, int pairs,
                    int frames, const std::string& out_dir, std::uint64_t seed = 0, const EmbedOptions& opt = {});

void write_report(const EvalReport& report, const std::string& out_dir);

MORPH_END_NAMESPACE
