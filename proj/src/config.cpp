#include "morph/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

MORPH_BEGIN_NAMESPACE

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt_real(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

template <std::size_t N, typename T>
std::array<T, N> parse_list(const std::string& key, const std::string& v) {
  std::array<T, N> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) break;
    out[i++] = parse_number<T>(key, trim(item));
  }
  if (i != N || std::getline(ss, item, ','))
    throw ConfigError("config key '" + key + "': expected " + std::to_string(N) + " comma-separated values");
  return out;
}

template <typename Array>
std::string fmt_list(const Array& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) s += (i ? "," : "") + std::to_string(a[i]);
  return s;
}

struct Key {
  const char* name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define MORPH_INT_KEY(key, field, type)                                                             \
  Key {                                                                                             \
    key, [](const TrainConfig& c) { return std::to_string(c.field); },                             \
        [](TrainConfig& c, const std::string& v) { c.field = parse_number<type>(key, v); }          \
  }
#define MORPH_REAL_KEY(key, field)                                                                  \
  Key {                                                                                             \
    key, [](const TrainConfig& c) { return fmt_real(c.field); },                                    \
        [](TrainConfig& c, const std::string& v) { c.field = parse_real(key, v); }                  \
  }
#define MORPH_BOOL_KEY(key, field)                                                                  \
  Key {                                                                                             \
    key, [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); },              \
        [](TrainConfig& c, const std::string& v) { c.field = parse_bool(key, v); }                  \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"data", [](const TrainConfig& c) { return c.data; }, [](TrainConfig& c, const std::string& v) { c.data = v; }},
      MORPH_INT_KEY("steps", steps, std::int64_t),
      MORPH_INT_KEY("seed", seed, std::uint64_t),
      {"out_dir", [](const TrainConfig& c) { return c.out_dir; },
       [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
      MORPH_INT_KEY("epochs", epochs, std::int64_t),
      MORPH_INT_KEY("resolution", resolution, std::int64_t),
      MORPH_INT_KEY("k", k, int),
      MORPH_INT_KEY("batch", batch, int),
      {"mode", [](const TrainConfig& c) { return std::string(c.content_style() ? "content-style" : "single"); },
       [](TrainConfig& c, const std::string& v) {
         if (v == "single") c.mode = TrainMode::SingleAxis;
         else if (v == "content-style") c.mode = TrainMode::ContentStyle;
         else throw ConfigError("config key 'mode': expected 'single' or 'content-style', got '" + v + "'");
       }},
      MORPH_REAL_KEY("lr", adam.lr),
      MORPH_REAL_KEY("beta1", adam.beta1),
      MORPH_REAL_KEY("beta2", adam.beta2),
      MORPH_REAL_KEY("adam_eps", adam.eps),
      MORPH_REAL_KEY("lambda_gan", weights.gan),
      MORPH_REAL_KEY("lambda_transition", weights.transition),
      MORPH_REAL_KEY("lambda_recon", weights.recon),
      MORPH_REAL_KEY("lambda_warp", weights.warp),
      MORPH_REAL_KEY("lambda_identity", weights.identity),
      MORPH_REAL_KEY("lambda_endpoint", weights.endpoint),
      MORPH_BOOL_KEY("use_gan", weights.use_gan),
      MORPH_BOOL_KEY("use_local_ps", weights.use_local_ps),
      MORPH_BOOL_KEY("use_global_ps", weights.use_global_ps),
      MORPH_BOOL_KEY("use_recon", weights.use_recon),
      MORPH_BOOL_KEY("use_adain", weights.use_adain),
      MORPH_BOOL_KEY("use_stn", weights.use_stn),
      {"ps_aggregation",
       [](const TrainConfig& c) {
         return std::string(c.aggregation == PsAggregation::MeanOfGroups ? "mean" : "concat");
       },
       [](TrainConfig& c, const std::string& v) {
         if (v == "mean") c.aggregation = PsAggregation::MeanOfGroups;
         else if (v == "concat") c.aggregation = PsAggregation::Concatenated;
         else throw ConfigError("config key 'ps_aggregation': expected 'mean' or 'concat', got '" + v + "'");
       }},
      MORPH_INT_KEY("enc_base", enc_base, std::int64_t),
      MORPH_INT_KEY("d_base", d_base, std::int64_t),
      MORPH_REAL_KEY("init_std", init_std),
      MORPH_INT_KEY("stn_grid", stn.grid, std::int64_t),
      MORPH_INT_KEY("stn_conv1", stn.conv1, std::int64_t),
      MORPH_INT_KEY("stn_conv2", stn.conv2, std::int64_t),
      MORPH_INT_KEY("stn_hidden", stn.hidden, std::int64_t),
      MORPH_REAL_KEY("stn_residual_scale", stn.residual_scale),
      {"ext_widths", [](const TrainConfig& c) { return fmt_list(c.extractor.widths); },
       [](TrainConfig& c, const std::string& v) {
         c.extractor.widths = parse_list<kNumLayerGroups, std::int64_t>("ext_widths", v);
       }},
      {"ext_convs", [](const TrainConfig& c) { return fmt_list(c.extractor.convs_per_group); },
       [](TrainConfig& c, const std::string& v) {
         c.extractor.convs_per_group = parse_list<kNumLayerGroups, int>("ext_convs", v);
       }},
      {"ext_weights", [](const TrainConfig& c) { return c.extractor_weights; },
       [](TrainConfig& c, const std::string& v) { c.extractor_weights = v; }},
      MORPH_INT_KEY("ext_seed", extractor_seed, std::uint64_t),
      MORPH_INT_KEY("toy_count", toy_count, std::size_t),
      {"toy_family", [](const TrainConfig& c) { return family_name(c.toy_family); },
       [](TrainConfig& c, const std::string& v) { c.toy_family = parse_family(v); }},
      MORPH_REAL_KEY("test_fraction", test_fraction),
      MORPH_INT_KEY("checkpoint_every", checkpoint_every, std::int64_t),
      MORPH_BOOL_KEY("write_files", write_files),
  };
  return table;
}

#undef MORPH_INT_KEY
#undef MORPH_REAL_KEY
#undef MORPH_BOOL_KEY

}  // namespace

NetworkSpec TrainConfig::network() const {
  NetworkSpec s;
  s.resolution = resolution;
  s.enc_base = enc_base;
  s.d_base = d_base;
  s.time_channels = content_style() ? 2 : 1;
  s.init_std = init_std;
  return s;
}

void TrainConfig::validate() const {
  if (data.empty()) throw ConfigError("config key 'data' must not be empty");
  if (out_dir.empty() && write_files) throw ConfigError("config key 'out_dir' must not be empty");
  if (steps <= 0 && epochs <= 0) throw ConfigError("config key 'steps' must be positive");
  if (k < 2) throw ConfigError("config key 'k' must be >= 2");
  if (batch < 1) throw ConfigError("config key 'batch' must be >= 1");
  try {
    const int depth = network().depth();
    if (resolution % (std::int64_t{1} << depth) != 0) throw ConfigError("resolution not divisible by 2^depth");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'resolution': ") + e.what());
  }
  if (resolution % 32 != 0) throw ConfigError("config key 'resolution' must be a multiple of 32 (extractor depth)");
  if (test_fraction < 0 || test_fraction >= 1) throw ConfigError("config key 'test_fraction' must lie in [0,1)");
  if (stn.grid < 2) throw ConfigError("config key 'stn_grid' must be >= 2");
  for (int i = 0; i < kNumLayerGroups; ++i)
    if (extractor.widths[i] < 1 || extractor.convs_per_group[i] < 1)
      throw ConfigError("extractor widths and conv counts must be positive");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(*this));
  return out;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  const auto& table = keys();
  auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->set(*this, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

TrainConfig TrainConfig::from_pairs(const std::map<std::string, std::string>& values) {
  for (const char* required : {"data", "seed", "out_dir"})
    if (!values.count(required)) throw ConfigError(std::string("missing config key '") + required + "'");
  if (!values.count("steps") && !values.count("epochs")) throw ConfigError("missing config key 'steps'");
  TrainConfig c;
  for (const auto& [k, v] : values) c.set(k, v);
  c.validate();
  return c;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (values.count(key)) throw ConfigError("config key '" + key + "' given twice");
    values[key] = trim(line.substr(eq + 1));
  }
  return from_pairs(values);
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"main",     "no-gan",   "no-local-ps", "no-global-ps",
                                             "no-recon", "no-adain", "no-stn"};
  return v;
}

TrainConfig apply_variant(TrainConfig c, const std::string& variant) {
  auto& w = c.weights;
  if (variant == "main") {
  } else if (variant == "no-gan") {
    w.use_gan = false;
  } else if (variant == "no-local-ps") {
    w.use_local_ps = false;
  } else if (variant == "no-global-ps") {
    w.use_global_ps = false;
  } else if (variant == "no-recon") {
    w.use_recon = false;
  } else if (variant == "no-adain") {
    w.use_adain = false;
  } else if (variant == "no-stn") {
    w.use_stn = false;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  return c;
}

MORPH_END_NAMESPACE
