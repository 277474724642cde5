#include "eds/experiment/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace eds::experiment {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(value) + "' is not " + want);
}

template <class T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer in range");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> parse_reals(std::string_view key, std::string_view v) {
  std::vector<double> out;
  while (true) {
    const std::size_t comma = v.find(',');
    out.push_back(parse_real(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <class T>
Field integer(const char* key, T ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
          [member, key](ExperimentConfig& c, std::string_view v) { c.*member = parse_integer<T>(key, v); }};
}

// Nested members are reached through an accessor.
template <class T, class Access>
Field integer_at(const char* key, Access access) {
  return {key,
          [access](const ExperimentConfig& c) {
            return std::to_string(access(c));
          },
          [access, key](ExperimentConfig& c, std::string_view v) { access(c) = parse_integer<T>(key, v); }};
}

template <class Access>
Field real_at(const char* key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return fmt(access(c)); },
          [access, key](ExperimentConfig& c, std::string_view v) { access(c) = parse_real(key, v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      integer("seed", &C::seed),
      integer("train_seed", &C::train_seed),
      {"out_dir", [](const C& c) { return c.out_dir; },
       [](C& c, std::string_view v) { c.out_dir = std::string(v); }},

      integer("size", &C::size),
      integer("phases", &C::phases),
      {"morphology", [](const C& c) { return to_string(c.morphology.kind); },
       [](C& c, std::string_view v) {
         try {
           c.morphology.kind = parse_morphology(std::string(v));
         } catch (const std::exception&) {
           bad_value("morphology", v, "halfplane, lamellar or blobs");
         }
       }},
      real_at("feature_scale", [](auto& c) -> auto& { return c.morphology.feature_scale; }),
      real_at("waviness", [](auto& c) -> auto& { return c.morphology.waviness; }),
      integer_at<int>("blob_bumps", [](auto& c) -> auto& { return c.morphology.blob_bumps; }),
      real_at("noise_fraction", [](auto& c) -> auto& { return c.noise_fraction; }),

      integer("bins", &C::bins),
      integer("spectra_per_phase", &C::spectra_per_phase),
      real_at("background_level", [](auto& c) -> auto& { return c.spectra.background_level; }),
      integer_at<int>("peaks_per_phase", [](auto& c) -> auto& { return c.spectra.peaks_per_phase; }),
      real_at("peak_min", [](auto& c) -> auto& { return c.spectra.peak_min; }),
      real_at("peak_max", [](auto& c) -> auto& { return c.spectra.peak_max; }),
      real_at("peak_width", [](auto& c) -> auto& { return c.spectra.peak_width; }),
      real_at("amplitude_jitter", [](auto& c) -> auto& { return c.spectra.amplitude_jitter; }),
      real_at("background_jitter", [](auto& c) -> auto& { return c.spectra.background_jitter; }),
      real_at("intensity_jitter", [](auto& c) -> auto& { return c.spectra.intensity_jitter; }),
      integer_at<std::uint64_t>("layout_seed", [](auto& c) -> auto& { return c.spectra.layout_seed; }),
      {"noise_mode", [](const C& c) { return to_string(c.noise.mode); },
       [](C& c, std::string_view v) {
         try {
           c.noise.mode = parse_noise_mode(std::string(v));
         } catch (const std::exception&) {
           bad_value("noise_mode", v, "scaled or offset");
         }
       }},
      real_at("noise_lambda", [](auto& c) -> auto& { return c.noise.lambda; }),
      real_at("ill_lambda", [](auto& c) -> auto& { return c.ill_lambda; }),

      integer_at<std::size_t>("nnr_hidden_layers", [](auto& c) -> auto& { return c.nnr.hidden_layers; }),
      integer_at<std::size_t>("nnr_hidden_width", [](auto& c) -> auto& { return c.nnr.hidden_width; }),
      integer_at<std::size_t>("nnr_output_width", [](auto& c) -> auto& { return c.nnr.output_width; }),
      integer_at<int>("nnr_epochs", [](auto& c) -> auto& { return c.nnr.epochs; }),
      real_at("nnr_learning_rate", [](auto& c) -> auto& { return c.nnr.learning_rate; }),
      real_at("nnr_momentum", [](auto& c) -> auto& { return c.nnr.momentum; }),
      integer_at<std::size_t>("nnr_batch_size", [](auto& c) -> auto& { return c.nnr.batch_size; }),
      integer_at<int>("nnr_augment_draws", [](auto& c) -> auto& { return c.nnr.augment_draws; }),
      integer_at<int>("nnr_calibration_ill", [](auto& c) -> auto& { return c.nnr.calibration_ill; }),
      real_at("nnr_max_validation_mse", [](auto& c) -> auto& { return c.nnr.max_validation_mse; }),

      integer_at<int>("cnn_epochs", [](auto& c) -> auto& { return c.cnn.epochs; }),
      real_at("cnn_learning_rate", [](auto& c) -> auto& { return c.cnn.learning_rate; }),
      real_at("cnn_momentum", [](auto& c) -> auto& { return c.cnn.momentum; }),
      integer_at<std::size_t>("cnn_batch_size", [](auto& c) -> auto& { return c.cnn.batch_size; }),
      integer_at<int>("cnn_augment_draws", [](auto& c) -> auto& { return c.cnn.augment_draws; }),
      real_at("cnn_min_validation_accuracy", [](auto& c) -> auto& { return c.cnn.min_validation_accuracy; }),

      real_at("initial_fraction", [](auto& c) -> auto& { return c.sampling.initial_fraction; }),
      real_at("stop_fraction", [](auto& c) -> auto& { return c.sampling.stop_fraction; }),
      integer_at<int>("neighbors", [](auto& c) -> auto& { return c.sampling.recon.neighbors; }),
      integer_at<int>("density_radius", [](auto& c) -> auto& { return c.sampling.recon.density_radius; }),
      integer_at<int>("train_images", [](auto& c) -> auto& { return c.train_images; }),
      {"coverage_levels", [](const C& c) { return fmt(c.pairs.coverage_levels); },
       [](C& c, std::string_view v) { c.pairs.coverage_levels = parse_reals("coverage_levels", v); }},
      integer_at<std::size_t>("samples_per_level", [](auto& c) -> auto& { return c.pairs.samples_per_level; }),
      real_at("ridge_lambda", [](auto& c) -> auto& { return c.ridge_lambda; }),

      integer("snapshot_stride", &C::snapshot_stride),
      {"run_baseline", [](const C& c) { return std::string(c.run_baseline ? "true" : "false"); },
       [](C& c, std::string_view v) { c.run_baseline = parse_bool("run_baseline", v); }},
  };
  return table;
}

}  // namespace

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out{"config_version"};
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "config_version") {
    const int v = parse_integer<int>(key, value);
    if (v != kVersion) {
      throw ConfigError("config: version " + std::to_string(v) + " unsupported (expected " +
                        std::to_string(kVersion) + ")");
    }
    return;
  }
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

void ExperimentConfig::validate() const {
  if (seed == train_seed) {
    throw ConfigError("config: seed and train_seed must differ so test and training phantoms are disjoint");
  }
  if (out_dir.empty()) throw ConfigError("config: out_dir is empty");
  if (size < 8) throw ConfigError("config: size must be >= 8");
  if (phases < 2 || phases > kMaxPhases) throw ConfigError("config: phases must be in [2, 100]");
  if (!(morphology.feature_scale > 0.0)) throw ConfigError("config: feature_scale must be > 0");
  if (!(noise_fraction >= 0.0 && noise_fraction < 1.0)) {
    throw ConfigError("config: noise_fraction must be in [0, 1)");
  }
  if (bins < 32) throw ConfigError("config: bins must be >= 32");
  if (spectra_per_phase < 4) throw ConfigError("config: spectra_per_phase must be >= 4");
  if (!(noise.lambda > 0.0) || !(ill_lambda > 0.0)) throw ConfigError("config: lambdas must be > 0");
  if (!(nnr.learning_rate > 0.0) || !(cnn.learning_rate > 0.0)) {
    throw ConfigError("config: learning rates must be > 0");
  }
  if (nnr.epochs < 1 || cnn.epochs < 1) throw ConfigError("config: epochs must be >= 1");
  sampling.validate();
  if (train_images < 1) throw ConfigError("config: train_images must be >= 1");
  if (pairs.samples_per_level < 1) throw ConfigError("config: samples_per_level must be >= 1");
  for (double c : pairs.coverage_levels) {
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("config: coverage_levels must lie in (0, 1)");
  }
  if (!(ridge_lambda >= 0.0)) throw ConfigError("config: ridge_lambda must be >= 0");
  if (snapshot_stride < 0) throw ConfigError("config: snapshot_stride must be >= 0");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::to_text() const {
  std::string out = "config_version = " + std::to_string(kVersion) + "\n";
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw ConfigError("config: cannot write " + path.string());
  os << to_text();
}

}  // namespace eds::experiment
