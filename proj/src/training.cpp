#include "morph/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

MORPH_BEGIN_NAMESPACE

namespace fs = std::filesystem;

std::vector<PairIndex> make_pairs(std::span<const std::size_t> batch, std::size_t set_size, Rng& rng) {
  if (set_size < 2) throw std::invalid_argument("pairing needs at least two images");
  std::vector<PairIndex> out;
  out.reserve(batch.size());
  for (std::size_t a : batch) {
    if (a >= set_size) throw std::out_of_range("batch index outside the dataset");
    std::uniform_int_distribution<std::size_t> pick(0, set_size - 2);
    std::size_t b = pick(rng);
    if (b >= a) ++b;
    out.push_back({a, b});
  }
  return out;
}

std::vector<std::size_t> draw_real_pool(std::size_t set_size, int k, Rng& rng) {
  if (set_size == 0) throw std::invalid_argument("real pool needs a nonempty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, set_size - 1);
  std::vector<std::size_t> out(static_cast<std::size_t>(k));
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<std::size_t> sample_batch(std::size_t set_size, int batch, Rng& rng) {
  if (set_size == 0) throw std::invalid_argument("cannot sample from an empty dataset");
  const auto n = static_cast<std::size_t>(batch);
  std::vector<std::size_t> out;
  if (set_size >= n) {
    std::vector<std::size_t> order(set_size);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, set_size - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, set_size - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pick(rng));
  }
  return out;
}

std::string metrics_csv_header() { return "step,d_loss,adv_g,transition,recon,warp,identity,endpoint,total"; }

std::string metrics_csv_row(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(m.step), m.d_loss, m.adv_g, m.transition, m.recon, m.warp, m.identity,
                m.endpoint, m.total);
  return buf;
}

namespace {

FeatureExtractor build_extractor(const TrainConfig& c) {
  return c.extractor_weights.empty() ? random_extractor(c.extractor_seed, c.extractor)
                                     : load_weights(c.extractor_weights);
}

Tensor batched(const Tensor& image) {
  if (image.ndim() == 4) return image;
  if (image.ndim() == 3) return reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
  throw ShapeError("expected an image [3,H,W] or batch [N,3,H,W], got " + shape_str(image.shape()));
}

template <typename F>
Tensor component(const char* name, F&& compute) {
  Tensor value;
  try {
    value = compute();
  } catch (const NumericError& e) {
    throw TrainingError(std::string("non-finite value while computing loss component '") + name + "': " + e.what());
  }
  if (!std::isfinite(static_cast<double>(value.item())))
    throw TrainingError(std::string("loss component '") + name + "' is not finite");
  return value;
}

double value_of(const Tensor& t) { return t.defined() ? static_cast<double>(t.item()) : 0.0; }

std::string encode_meta(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '%' || std::isspace(static_cast<unsigned char>(c))) {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out += c;
    }
  }
  return out;
}

std::string decode_meta(const std::string& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '%' && i + 2 < v.size()) {
      out += static_cast<char>(std::stoi(v.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += v[i];
    }
  }
  return out;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  std::string s = os.str();
  for (char& c : s)
    if (c == ' ') c = ',';
  return s;
}

void restore_rng(Rng& rng, std::string s) {
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  is >> rng;
  if (!is) throw std::runtime_error("checkpoint has a malformed rng state");
}

void copy_into(const ParameterList& params, const Archive& archive) {
  for (const auto& p : params.items()) {
    const Tensor& src = archive.at(p.name);
    if (src.shape() != p.tensor.shape())
      throw std::runtime_error("checkpoint tensor '" + p.name + "' has shape " + shape_str(src.shape()) +
                               ", expected " + shape_str(p.tensor.shape()));
    auto dst = Tensor(p.tensor).data();
    std::copy(src.values().begin(), src.values().end(), dst.begin());
  }
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      init_rng_(config_.seed),
      rng_(config_.seed ^ 0x9E3779B97F4A7C15ull),
      extractor_(build_extractor(config_)),
      generator_(config_.network(), init_rng_),
      stn_(config_.stn, config_.resolution, init_rng_),
      disc_(config_.network(), init_rng_) {
  config_.validate();
  opt_g_ = Adam(g_parameters(), config_.adam);
  opt_d_ = Adam(d_parameters(), config_.adam);
}

ParameterList Trainer::g_parameters() const {
  ParameterList out;
  if (config_.weights.use_stn) out.append("", stn_.parameters());
  out.append("", generator_.parameters());
  return out;
}

std::vector<TimeSchedule> Trainer::draw_schedules(std::size_t pairs) {
  std::vector<TimeSchedule> out;
  for (std::size_t p = 0; p < pairs; ++p)
    out.push_back(config_.content_style() ? cs_schedule(config_.k, rng_) : uniform_schedule(config_.k));
  return out;
}

StepMetrics Trainer::train_step(const Tensor& a, const Tensor& b, const Tensor& real_pool,
                                const std::vector<TimeSchedule>& schedules) {
  const LossWeights w = config_.weights.normalized();
  const PsGroups groups = config_.ps_groups();
  const auto pairs = a.dim(0);
  const auto k = static_cast<std::int64_t>(schedules.front().size());
  StepMetrics m;
  m.step = step_;

  const SequenceOutput seq = generate_sequence(generator_, active_stn(), a, b, schedules, w.use_adain);
  const Tensor& frames = seq.frames;

  if (w.use_gan) {
    const Tensor fake = frames.detach();
    const Tensor d_loss = component("d_loss", [&] {
      return lsgan_d({disc_.local(real_pool), disc_.global(real_pool)}, {disc_.local(fake), disc_.global(fake)});
    });
    d_parameters().zero_grad();
    backward(d_loss);
    opt_d_.step();
    m.d_loss = value_of(d_loss);
  }

  std::vector<std::int64_t> first, last;
  for (std::int64_t p = 0; p < pairs; ++p) {
    first.push_back(p * k);
    last.push_back(p * k + k - 1);
  }
  LossComponents c;
  if (w.use_gan)
    c.adv_g = component("adv_g", [&] { return lsgan_g({disc_.local(frames), disc_.global(frames)}); });
  if (w.use_local_ps)
    c.transition = component("transition", [&] {
      return transition_loss(extractor_, frames, a, b, schedules, groups);
    });
  if (w.use_recon)
    c.recon = component("recon", [&] {
      return recon_loss(gather_batch(frames, first), gather_batch(frames, last), a, b);
    });
  if (w.use_stn) {
    c.warp = component("warp", [&] {
      const Tensor a_full = gather_batch(seq.warped.a_seq, last);
      const Tensor b_full = gather_batch(seq.warped.b_seq, first);
      return add(warp_loss(extractor_, a_full, b, groups), warp_loss(extractor_, b_full, a, groups));
    });
    c.identity = component("identity", [&] {
      return add(identity_reg(seq.warped.ab), identity_reg(seq.warped.ba));
    });
  }
  if (w.use_global_ps)
    c.endpoint = component("endpoint", [&] {
      return endpoint_blend_loss(extractor_, frames, seq.warped.a_seq, seq.warped.b_seq, schedules, groups);
    });
  const Tensor total = component("total", [&] { return total_g(c, w); });

  const ParameterList gp = g_parameters();
  gp.zero_grad();
  if (total.requires_grad()) backward(total);
  opt_g_.step();
  ++step_;

  m.adv_g = value_of(c.adv_g);
  m.transition = value_of(c.transition);
  m.recon = value_of(c.recon);
  m.warp = value_of(c.warp);
  m.identity = value_of(c.identity);
  m.endpoint = value_of(c.endpoint);
  m.total = value_of(total);
  return m;
}

StepMetrics Trainer::step(const Dataset& data) {
  const std::size_t n = data.size();
  const auto batch = sample_batch(n, config_.batch, rng_);
  const auto pairs = make_pairs(batch, n, rng_);
  std::vector<Tensor> as, bs, reals;
  for (const auto& p : pairs) {
    as.push_back(data.items[p.a]);
    bs.push_back(data.items[p.b]);
  }
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (std::size_t i : draw_real_pool(n, config_.k, rng_)) reals.push_back(data.items[i]);
  const auto schedules = draw_schedules(pairs.size());
  return train_step(stack_images(as), stack_images(bs), stack_images(reals), schedules);
}

Tensor Trainer::morph(const Tensor& a, const Tensor& b, const TimeSchedule& schedule) const {
  NoGradGuard guard;
  return generate_sequence(generator_, active_stn(), batched(a), batched(b), {schedule}, config_.weights.use_adain)
      .frames;
}

Archive Trainer::checkpoint() const {
  Archive ar;
  ar.meta["format"] = "morph-checkpoint";
  ar.meta["precision"] = kRealName;
  ar.meta["step"] = std::to_string(step_);
  ar.meta["rng"] = rng_state(rng_);
  for (const auto& [key, value] : config_.to_pairs())
    if (!value.empty()) ar.meta["cfg." + key] = encode_meta(value);
  ParameterList all;
  all.append("", stn_.parameters());
  all.append("", generator_.parameters());
  all.append("", disc_.parameters());
  all.append("", opt_g_.state_tensors("opt_g."));
  all.append("", opt_d_.state_tensors("opt_d."));
  for (const auto& p : all.items()) ar.tensors.push_back({p.name, p.tensor.detach()});
  return ar;
}

Trainer Trainer::from_checkpoint(const Archive& ar) {
  if (auto it = ar.meta.find("format"); it == ar.meta.end() || it->second != "morph-checkpoint")
    throw std::runtime_error("archive is not a training checkpoint");
  TrainConfig config;
  for (const auto& [key, value] : ar.meta)
    if (key.rfind("cfg.", 0) == 0) config.set(key.substr(4), decode_meta(value));
  Trainer t(config);
  ParameterList all;
  all.append("", t.stn_.parameters());
  all.append("", t.generator_.parameters());
  all.append("", t.disc_.parameters());
  copy_into(all, ar);
  t.opt_g_.load_state(ar.tensors, "opt_g.");
  t.opt_d_.load_state(ar.tensors, "opt_d.");
  t.step_ = std::stoll(ar.meta_at("step"));
  restore_rng(t.rng_, ar.meta_at("rng"));
  return t;
}

Split load_training_data(const TrainConfig& c) {
  Dataset all = c.data == "toy" ? gen_toy(c.toy_count, c.seed, c.resolution, c.toy_family)
                                : load_folder(c.data, c.resolution);
  all.validate();
  if (c.test_fraction <= 0) return {all, Dataset{{}, "test"}};
  return split(all, c.test_fraction, c.seed);
}

FitResult fit(const TrainConfig& config, const Dataset& train,
              const std::function<void(const StepMetrics&)>& on_step) {
  config.validate();
  FitResult result{Trainer(config), {}};
  Trainer& t = result.trainer;
  const auto per_epoch = static_cast<std::int64_t>((train.size() + config.batch - 1) / config.batch);
  const std::int64_t steps = config.epochs > 0 ? config.epochs * per_epoch : config.steps;

  std::ofstream csv;
  const fs::path out = config.out_dir;
  if (config.write_files) {
    fs::create_directories(out);
    csv.open(out / "metrics.csv");
    if (!csv) throw std::runtime_error("cannot write " + (out / "metrics.csv").string());
    csv << metrics_csv_header() << '\n';
  }
  for (std::int64_t s = 0; s < steps; ++s) {
    const StepMetrics m = t.step(train);
    result.history.push_back(m);
    if (config.write_files) csv << metrics_csv_row(m) << '\n' << std::flush;
    if (on_step) on_step(m);
    if (config.write_files && config.checkpoint_every > 0 && (s + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06lld.morph", static_cast<long long>(s + 1));
      save_archive(t.checkpoint(), (out / name).string());
    }
  }
  if (config.write_files) save_archive(t.checkpoint(), (out / "final.morph").string());
  return result;
}

MORPH_END_NAMESPACE
