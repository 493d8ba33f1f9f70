#include "morph/eval.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

MORPH_BEGIN_NAMESPACE

namespace fs = std::filesystem;

GaussianFit fit_gaussian(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw std::invalid_argument("a Gaussian fit needs at least two embeddings");
  GaussianFit g;
  g.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - g.mean.transpose();
  g.cov = centered.transpose() * centered / double(rows.rows() - 1);
  return g;
}

namespace {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Tensor load_image(const std::string& path, std::int64_t resolution) {
  return resize_image(read_png(path), resolution, resolution);
}

Tensor as_batch(const Tensor& image) {
  return image.ndim() == 4 ? image : reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
}

}  // namespace

double frechet_from_moments(const GaussianFit& x, const GaussianFit& y, Covariance mode) {
  if (x.mean.size() != y.mean.size()) throw std::invalid_argument("embedding dimensions differ");
  const double mean_term = (x.mean - y.mean).squaredNorm();
  if (mode == Covariance::Diagonal) {
    const Eigen::VectorXd sx = x.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    const Eigen::VectorXd sy = y.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return mean_term + (sx - sy).squaredNorm();
  }
  const Eigen::MatrixXd rx = sym_sqrt(x.cov);
  const Eigen::MatrixXd cross = sym_sqrt(rx * y.cov * rx);
  return std::max(0.0, mean_term + x.cov.trace() + y.cov.trace() - 2.0 * cross.trace());
}

double frechet_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Covariance mode) {
  return frechet_from_moments(fit_gaussian(x), fit_gaussian(y), mode);
}

Eigen::MatrixXd embed(const FeatureExtractor& ext, const std::vector<Tensor>& images, const EmbedOptions& opt) {
  NoGradGuard guard;
  Eigen::MatrixXd out;
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(opt.batch)) {
    const auto end = std::min(images.size(), begin + static_cast<std::size_t>(opt.batch));
    std::vector<Tensor> part(images.begin() + static_cast<std::ptrdiff_t>(begin),
                             images.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor batch = stack_images(part);
    if (batch.dim(2) != opt.size || batch.dim(3) != opt.size) batch = bilinear_upsample(batch, opt.size, opt.size);
    const Tensor feats = spatial_mean(ext.pyramid(batch, opt.group).at(opt.group));
    const auto c = feats.numel() / feats.dim(0);
    if (out.size() == 0) out.resize(static_cast<Eigen::Index>(images.size()), c);
    for (std::int64_t r = 0; r < feats.dim(0); ++r)
      for (std::int64_t j = 0; j < c; ++j)
        out(static_cast<Eigen::Index>(begin) + r, j) = static_cast<double>(feats.values()[r * c + j]);
  }
  return out;
}

double frechet_distance(const FeatureExtractor& ext, const std::vector<Tensor>& x, const std::vector<Tensor>& y,
                        const EmbedOptions& opt) {
  if (x.size() < 2 || y.size() < 2) throw std::invalid_argument("Fréchet distance needs at least two images per set");
  return frechet_distance(embed(ext, x, opt), embed(ext, y, opt), opt.covariance);
}

PacingStats pacing(const FeatureExtractor& ext, const std::vector<Tensor>& frames, const std::vector<Tensor>& a,
                   const std::vector<Tensor>& b, const TimeSchedule& schedule, const PsGroups& groups) {
  NoGradGuard guard;
  if (frames.size() != a.size() || a.size() != b.size() || frames.empty())
    throw std::invalid_argument("pacing needs one sequence per (A, B) pair");
  const auto k = static_cast<std::int64_t>(schedule.size());
  std::vector<std::int64_t> prev, next;
  for (std::int64_t i = 1; i < k; ++i) {
    prev.push_back(i - 1);
    next.push_back(i);
  }
  const Tensor pair_ps = ps_rows(ext.extract(stack_images(a), groups.transition),
                                 ext.extract(stack_images(b), groups.transition), groups.aggregation);
  PacingStats s;
  for (std::size_t p = 0; p < frames.size(); ++p) {
    if (frames[p].dim(0) != k) throw ShapeError("pacing: sequence length does not match the schedule");
    const auto feats = ext.extract(frames[p], groups.transition);
    std::vector<Tensor> fp, fn;
    for (const auto& f : feats) {
      fp.push_back(gather_batch(f, prev));
      fn.push_back(gather_batch(f, next));
    }
    const Tensor step_ps = ps_rows(fp, fn, groups.aggregation);
    double worst = 0;
    for (std::int64_t i = 1; i < k; ++i) {
      const double dt = double(schedule.content[static_cast<std::size_t>(i)]) -
                        double(schedule.content[static_cast<std::size_t>(i - 1)]);
      const double dev = std::abs(double(step_ps.values()[static_cast<std::size_t>(i - 1)]) -
                                  dt * double(pair_ps.values()[p]));
      worst = std::max(worst, dev);
    }
    s.per_pair.push_back(worst);
    s.max = std::max(s.max, worst);
  }
  double total = 0;
  for (double v : s.per_pair) total += v;
  s.mean = total / double(s.per_pair.size());
  return s;
}

Tensor montage(const Tensor& frames) {
  const auto n = frames.dim(0), c = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
  Tensor out({c, h, n * w});
  auto d = out.data();
  const auto& v = frames.values();
  for (std::int64_t f = 0; f < n; ++f)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        std::copy_n(v.begin() + ((f * c + ch) * h + y) * w, w, d.begin() + (ch * h + y) * n * w + f * w);
  return out;
}

std::vector<std::string> write_sequence(const Tensor& frames, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  char name[32];
  for (std::int64_t i = 0; i < frames.dim(0); ++i) {
    std::snprintf(name, sizeof name, "frame_%03lld.png", static_cast<long long>(i));
    paths.push_back((fs::path(out_dir) / name).string());
    write_png(image_at(frames, i), paths.back());
  }
  write_png(montage(frames), (fs::path(out_dir) / "montage.png").string());
  return paths;
}

Tensor morph_frames(const Trainer& model, const Tensor& a, const Tensor& b, int n_frames) {
  return model.morph(a, b, uniform_schedule(n_frames));
}

std::vector<std::string> cmd_morph(const Trainer& model, const std::string& a_path, const std::string& b_path,
                                   int n_frames, const std::string& out_dir) {
  const auto res = model.config().resolution;
  return write_sequence(morph_frames(model, load_image(a_path, res), load_image(b_path, res), n_frames), out_dir);
}

Tensor csgrid_cells(const Trainer& model, const Tensor& a, const Tensor& b, int size) {
  if (!model.config().content_style())
    throw std::invalid_argument("csgrid requires a checkpoint trained in content-style mode");
  if (size < 2) throw std::invalid_argument("csgrid size must be >= 2");
  NoGradGuard guard;
  const Tensor ab1 = as_batch(a), bb1 = as_batch(b);
  const auto cells = static_cast<std::int64_t>(size) * size;
  std::vector<std::int64_t> zeros(static_cast<std::size_t>(cells), 0);
  std::vector<Real> content, style;
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i) {
      content.push_back(static_cast<Real>(double(i) / (size - 1)));
      style.push_back(static_cast<Real>(double(j) / (size - 1)));
    }
  const Tensor a_rep = gather_batch(ab1, zeros), b_rep = gather_batch(bb1, zeros);
  const StnHead* stn = model.active_stn();
  ControlGrid ab, ba;
  if (stn) {
    ab = stn->predict(ab1, bb1);
    ba = stn->predict(bb1, ab1);
  } else {
    ab = ba = identity_grid(model.config().stn.grid, 1);
  }
  const ControlGrid ab_rep(gather_batch(ab.values(), zeros)), ba_rep(gather_batch(ba.values(), zeros));
  const Tensor a_w = apply(partial_warp(ab_rep, content, WarpDirection::AB), a_rep);
  const Tensor b_w = apply(partial_warp(ba_rep, content, WarpDirection::BA), b_rep);
  return model.generator().generate_frames(a_w, b_w, content, style, model.config().weights.use_adain);
}

Tensor cmd_csgrid(const Trainer& model, const std::string& a_path, const std::string& b_path, int size,
                  const std::string& out_dir) {
  const auto res = model.config().resolution;
  const Tensor cells = csgrid_cells(model, load_image(a_path, res), load_image(b_path, res), size);
  fs::create_directories(out_dir);
  Tensor grid({3, size * res, size * res});
  auto g = grid.data();
  char name[48];
  for (int j = 0; j < size; ++j)
    for (int i = 0; i < size; ++i) {
      const Tensor cell = image_at(cells, j * size + i);
      std::snprintf(name, sizeof name, "cell_r%02d_c%02d.png", j, i);
      write_png(cell, (fs::path(out_dir) / name).string());
      for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < res; ++y)
          std::copy_n(cell.values().begin() + (c * res + y) * res, res,
                      g.begin() + (c * size * res + j * res + y) * size * res + i * res);
    }
  write_png(grid, (fs::path(out_dir) / "grid.png").string());
  return cells;
}

Tensor blend_frames(const StnHead* stn, const Tensor& a, const Tensor& b, int n_frames) {
  NoGradGuard guard;
  const TimeSchedule s = uniform_schedule(n_frames);
  const auto seq = warp_sequence(stn, as_batch(a), as_batch(b), {s}, stn ? stn->spec().grid : 5);
  std::vector<Real> one_minus(s.content.size());
  for (std::size_t i = 0; i < s.content.size(); ++i) one_minus[i] = Real(1) - s.content[i];
  return add(scale_rows(seq.a_seq, one_minus), scale_rows(seq.b_seq, s.content));
}

std::vector<std::string> cmd_blend(const Trainer& model, const std::string& a_path, const std::string& b_path,
                                   int n_frames, const std::string& out_dir) {
  const auto res = model.config().resolution;
  return write_sequence(blend_frames(model.active_stn(), load_image(a_path, res), load_image(b_path, res), n_frames),
                        out_dir);
}

EvalReport evaluate(const Trainer& model, const Dataset& test, const Dataset& train, int pairs, int frames,
                    std::uint64_t seed, const EmbedOptions& opt) {
  if (test.size() < 2) throw std::invalid_argument("evaluation needs at least two test images");
  if (frames < 3) throw std::invalid_argument("evaluation needs at least three frames (interior frames are scored)");
  Rng rng(seed);
  const TimeSchedule schedule = uniform_schedule(frames);
  std::vector<Tensor> interior, seqs, as, bs;
  double recon = 0;
  for (int p = 0; p < pairs; ++p) {
    const std::size_t i = sample_batch(test.size(), 1, rng).front();
    const std::size_t j = make_pairs(std::span<const std::size_t>(&i, 1), test.size(), rng).front().b;
    const Tensor seq = model.morph(test.items[i], test.items[j], schedule);
    for (std::int64_t f = 1; f + 1 < frames; ++f) interior.push_back(image_at(seq, f));
    {
      NoGradGuard guard;
      recon += 0.5 * (double(mse(image_at(seq, 0), test.items[i]).item()) +
                      double(mse(image_at(seq, frames - 1), test.items[j]).item()));
    }
    seqs.push_back(seq);
    as.push_back(test.items[i]);
    bs.push_back(test.items[j]);
  }
  EvalReport r;
  r.pairs = pairs;
  r.frames = frames;
  r.recon_mse = recon / pairs;
  r.frechet = frechet_distance(model.extractor(), interior, train.items, opt);
  r.pacing = pacing(model.extractor(), seqs, as, bs, schedule, model.config().ps_groups());
  return r;
}

void write_report(const EvalReport& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream txt(fs::path(out_dir) / "report.txt");
  txt << "pairs: " << r.pairs << "\nframes: " << r.frames << "\ninterior frames scored: " << r.pairs * (r.frames - 2)
      << "\nfrechet (interior vs train): " << r.frechet << "\npacing deviation mean: " << r.pacing.mean
      << "\npacing deviation max: " << r.pacing.max << "\nendpoint reconstruction mse: " << r.recon_mse << '\n';
  std::ofstream csv(fs::path(out_dir) / "report.csv");
  csv << "metric,value\n";
  csv.precision(10);
  csv << "pairs," << r.pairs << "\nframes," << r.frames << "\nfrechet," << r.frechet << "\npacing_mean,"
      << r.pacing.mean << "\npacing_max," << r.pacing.max << "\nrecon_mse," << r.recon_mse << '\n';
  std::ofstream per_pair(fs::path(out_dir) / "pacing.csv");
  per_pair << "pair,max_deviation\n";
  per_pair.precision(10);
  for (std::size_t p = 0; p < r.pacing.per_pair.size(); ++p) per_pair << p << ',' << r.pacing.per_pair[p] << '\n';
}

EvalReport cmd_eval(const Trainer& model, const std::string& test_dir, const std::string& train_dir, int pairs,
                    int frames, const std::string& out_dir, std::uint64_t seed, const EmbedOptions& opt) {
  const auto res = model.config().resolution;
  const EvalReport r = evaluate(model, load_folder(test_dir, res), load_folder(train_dir, res), pairs, frames, seed, opt);
  write_report(r, out_dir);
  return r;
}

MORPH_END_NAMESPACE
