#include "eds/detector/detector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eds/nn/trainer.hpp"

namespace eds {

nn::Tensor normalize_spectrum(const Spectrum& z, double gain) {
  std::vector<double> values(z.counts);
  const double total = z.total();
  if (total > 0.0) {
    const double scale = gain / total;
    for (double& v : values) v *= scale;
  } else {
    std::fill(values.begin(), values.end(), 0.0);
  }
  return nn::Tensor(std::move(values));
}

double default_gain(std::size_t bins) { return std::sqrt(static_cast<double>(bins)); }

namespace detector {

NnrModel::NnrModel(nn::Network net, std::vector<double> line, double threshold, double gain)
    : net_(std::move(net)), line_(std::move(line)), threshold_(threshold), gain_(gain) {
  if (net_.output_shape().size() != line_.size()) {
    throw ConfigError("nnr: output width does not match target line length");
  }
  if (line_.size() < 2) throw ConfigError("nnr: target line needs >= 2 entries");
  if (std::all_of(line_.begin(), line_.end(), [&](double v) { return v == line_.front(); })) {
    throw ConfigError("nnr: target line must be non-constant");
  }
  if (!(threshold_ > 0.0) || !std::isfinite(threshold_)) {
    throw ConfigError("nnr: threshold must be finite and > 0");
  }
  if (!(gain_ > 0.0)) throw ConfigError("nnr: normalization gain must be > 0");
}

std::vector<double> NnrModel::ramp_line(std::size_t q) {
  if (q < 2) throw ConfigError("nnr: target line needs >= 2 entries");
  std::vector<double> f(q);
  for (std::size_t i = 0; i < q; ++i) f[i] = static_cast<double>(i) / static_cast<double>(q - 1);
  return f;
}

std::vector<double> NnrModel::residual(const Spectrum& z) const {
  if (z.size() != bins()) {
    throw InputError("nnr: spectrum has " + std::to_string(z.size()) + " bins, model expects " +
                     std::to_string(bins()));
  }
  const nn::Tensor out = net_.forward(normalize_spectrum(z, gain_));
  std::vector<double> g(line_.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::abs(line_[i] - out[i]);
  return g;
}

double residual_variance(std::span<const double> g) {
  if (g.empty()) return 0.0;
  const double n = static_cast<double>(g.size());
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  return var / n;
}

double NnrModel::variance_metric(const Spectrum& z) const { return residual_variance(residual(z)); }

DetectionResult NnrModel::detect(const Spectrum& z) const {
  const double s2 = variance_metric(z);
  return {s2, s2 > threshold_};
}

void NnrModel::set_threshold(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("nnr: threshold must be finite and > 0");
  threshold_ = t;
}

nn::Checkpoint NnrModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.net = net_;
  ckpt.arrays["line"] = line_;
  ckpt.arrays["threshold"] = {threshold_};
  ckpt.arrays["gain"] = {gain_};
  ckpt.tags["model"] = "nnr-detector";
  ckpt.tags["normalization"] = "unit-total-times-gain";
  return ckpt;
}

NnrModel NnrModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.tag("model") != "nnr-detector") {
    throw InputError("checkpoint is a '" + ckpt.tag("model") + "', expected nnr-detector");
  }
  return NnrModel(ckpt.net, ckpt.array("line"), ckpt.scalar("threshold"), ckpt.scalar("gain"));
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(q / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx =
      static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

double calibrate_threshold(std::vector<double> valid_sigma2, std::vector<double> ill_sigma2,
                           double* valid_p99, double* ill_p01) {
  constexpr double kFloor = 1e-300;
  const double hi_valid = std::max(percentile(std::move(valid_sigma2), 99.0), kFloor);
  const double lo_ill = std::max(percentile(std::move(ill_sigma2), 1.0), kFloor);
  if (valid_p99) *valid_p99 = hi_valid;
  if (ill_p01) *ill_p01 = lo_ill;
  return std::exp(0.5 * (std::log(hi_valid) + std::log(lo_ill)));
}

namespace {

nn::Network build_nnr_network(std::size_t bins, const NnrOptions& o) {
  if (o.hidden_layers < 1 || o.hidden_width < 1) throw ConfigError("nnr: need >= 1 hidden layer");
  std::vector<nn::LayerSpec> layers;
  std::size_t in = bins;
  for (std::size_t h = 0; h < o.hidden_layers; ++h) {
    layers.push_back(nn::LayerSpec::dense(in, o.hidden_width));
    layers.push_back(nn::LayerSpec::relu());
    in = o.hidden_width;
  }
  layers.push_back(nn::LayerSpec::dense(in, o.output_width));
  return nn::Network({1, bins}, std::move(layers));
}

}  // namespace

NnrModel train_nnr(const PhaseLibrary& library, const NnrOptions& o, NnrTrainingReport* report) {
  if (library.min_spectra_per_phase() < 2) {
    throw ConfigError("train_nnr: need >= 2 spectra per phase");
  }
  if (o.epochs < 1 || o.batch_size < 1 || o.augment_draws < 1 || o.validation_draws < 1 ||
      o.calibration_ill < 1) {
    throw ConfigError("train_nnr: epochs, batch size and draw counts must be >= 1");
  }
  const auto [train, validation] = library.split_halves();
  const std::size_t bins = library.bins();
  const double gain = default_gain(bins);
  const std::vector<double> line = NnrModel::ramp_line(o.output_width);
  const nn::Tensor target(line);

  nn::Network net = build_nnr_network(bins, o);
  net.initialize(o.seed);
  nn::SgdTrainer trainer(net, {o.learning_rate, o.momentum, nn::Loss::kSquaredError});

  NnrTrainingReport local;
  NnrTrainingReport& rep = report ? *report : local;
  rep = {};

  std::vector<nn::Sample> samples;
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    samples.clear();
    std::uint64_t idx = 0;
    for (int l = 1; l <= train.phases(); ++l) {
      for (const Spectrum& clean : train.phase(l)) {
        for (int d = 0; d < o.augment_draws; ++d) {
          const Spectrum noisy = add_poisson_noise(
              clean, o.noise,
              derive_seed(o.seed, stream::kTrainData, static_cast<std::uint64_t>(epoch),
                          idx * 1024 + static_cast<std::uint64_t>(d)));
          samples.push_back({normalize_spectrum(noisy, gain), target});
        }
        ++idx;
      }
    }
    Rng shuffle_rng = make_rng(derive_seed(o.seed, stream::kTrainData, 0xffff,
                                           static_cast<std::uint64_t>(epoch)));
    std::shuffle(samples.begin(), samples.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += o.batch_size) {
      const std::size_t n = std::min(o.batch_size, samples.size() - start);
      total += trainer.step(std::span<const nn::Sample>(samples.data() + start, n)) *
               static_cast<double>(n);
    }
    rep.epoch_loss.push_back(total / static_cast<double>(samples.size()));
  }

  // Validation half: fit quality and the valid-side sigma^2 distribution.
  std::vector<double> valid_sigma2;
  double mse = 0.0;
  std::size_t count = 0;
  NnrModel model(net, line, 1.0, gain);
  std::uint64_t idx = 0;
  for (int l = 1; l <= validation.phases(); ++l) {
    for (const Spectrum& clean : validation.phase(l)) {
      for (int d = 0; d < o.validation_draws; ++d) {
        const Spectrum noisy = add_poisson_noise(
            clean, o.noise,
            derive_seed(o.seed, stream::kTrainData, 0x10000, idx * 1024 + static_cast<std::uint64_t>(d)));
        const auto g = model.residual(noisy);
        double sq = 0.0;
        for (double v : g) sq += v * v;
        mse += sq / static_cast<double>(g.size());
        ++count;
        valid_sigma2.push_back(residual_variance(g));
      }
      ++idx;
    }
  }
  rep.validation_mse = mse / static_cast<double>(count);
  if (!(rep.validation_mse <= o.max_validation_mse)) {
    std::ostringstream os;
    os << "train_nnr: validation mse " << rep.validation_mse << " exceeds "
       << o.max_validation_mse << "; epoch losses:";
    for (double l : rep.epoch_loss) os << " " << l;
    throw TrainingError(os.str());
  }

  std::vector<double> ill_sigma2;
  Rng ill_rng = make_rng(derive_seed(o.seed, stream::kTrainData, 0x20000));
  for (int i = 0; i < o.calibration_ill; ++i) {
    ill_sigma2.push_back(model.variance_metric(gen_ill_spectrum(bins, o.ill_lambda, ill_rng)));
  }
  const double t = calibrate_threshold(valid_sigma2, ill_sigma2, &rep.valid_p99, &rep.ill_p01);
  rep.separated = rep.valid_p99 < rep.ill_p01;
  model.set_threshold(t);
  return model;
}

}  // namespace detector
}  // namespace eds
