#include "eds/classifier/classifier.hpp"

#include <algorithm>
#include <sstream>

#include "eds/nn/trainer.hpp"

namespace eds::classifier {

std::size_t flat_width(std::size_t bins, const CnnArchitecture& a) {
  std::size_t len = bins;
  for (int stage = 0; stage < 2; ++stage) {
    len = nn::window_output_length(len, a.kernel, a.stride, a.padding);  // conv
    len = nn::window_output_length(len, a.kernel, a.stride, a.padding);  // pool
  }
  return len * a.conv2_features;
}

nn::Network build_cnn(std::size_t bins, int phases, const CnnArchitecture& a) {
  if (phases < 2) throw ConfigError("cnn: need >= 2 phases");
  if (a.conv1_features == 0 || a.conv2_features == 0) throw ConfigError("cnn: zero conv features");
  if (a.conv2_features % a.conv1_features != 0) {
    throw ConfigError("cnn: second conv feature count must be a multiple of the first");
  }
  using nn::LayerSpec;
  std::vector<LayerSpec> layers{
      LayerSpec::conv1d(1, a.conv1_features, a.kernel, a.stride, a.padding),
      LayerSpec::relu(),
      LayerSpec::maxpool1d(a.kernel, a.stride, a.padding),
      LayerSpec::conv1d(a.conv1_features, a.conv2_features, a.kernel, a.stride, a.padding),
      LayerSpec::relu(),
      LayerSpec::maxpool1d(a.kernel, a.stride, a.padding),
  };
  std::size_t in = flat_width(bins, a);
  for (std::size_t w : a.fc_widths) {
    layers.push_back(LayerSpec::dense(in, w));
    layers.push_back(LayerSpec::relu());
    in = w;
  }
  layers.push_back(LayerSpec::dense(in, static_cast<std::size_t>(phases)));
  layers.push_back(LayerSpec::softmax());
  return nn::Network({1, bins}, std::move(layers));
}

ClassScores scores_from_probs(std::vector<double> probs) {
  ClassScores s;
  const std::size_t best = nn::argmax(probs);
  s.label = static_cast<Label>(best + 1);
  s.max_prob = probs.empty() ? 0.0 : probs[best];
  s.probs = std::move(probs);
  return s;
}

CnnModel::CnnModel(nn::Network net, int phases, double gain)
    : net_(std::move(net)), phases_(phases), gain_(gain) {
  if (phases_ < 2 || net_.output_shape().size() != static_cast<std::size_t>(phases_)) {
    throw ConfigError("cnn: output width does not match phase count");
  }
  if (net_.layers().back().kind != nn::LayerKind::kSoftmax) {
    throw ConfigError("cnn: network must end in softmax");
  }
  if (!(gain_ > 0.0)) throw ConfigError("cnn: normalization gain must be > 0");
}

ClassScores CnnModel::classify(const Spectrum& z) const {
  if (z.size() != bins()) {
    throw InputError("cnn: spectrum has " + std::to_string(z.size()) + " bins, model expects " +
                     std::to_string(bins()));
  }
  return scores_from_probs(net_.forward(normalize_spectrum(z, gain_)).vector());
}

nn::Checkpoint CnnModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.net = net_;
  ckpt.arrays["phases"] = {static_cast<double>(phases_)};
  ckpt.arrays["gain"] = {gain_};
  ckpt.tags["model"] = "cnn-classifier";
  ckpt.tags["normalization"] = "unit-total-times-gain";
  return ckpt;
}

CnnModel CnnModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.tag("model") != "cnn-classifier") {
    throw InputError("checkpoint is a '" + ckpt.tag("model") + "', expected cnn-classifier");
  }
  return CnnModel(ckpt.net, static_cast<int>(ckpt.scalar("phases")), ckpt.scalar("gain"));
}

namespace {

nn::Tensor one_hot(int label, int phases) {
  nn::Tensor t(nn::Shape{1, static_cast<std::size_t>(phases)});
  t[static_cast<std::size_t>(label - 1)] = 1.0;
  return t;
}

}  // namespace

CnnModel train_cnn(const PhaseLibrary& library, const CnnOptions& o, CnnTrainingReport* report) {
  if (library.min_spectra_per_phase() < 2) {
    throw ConfigError("train_cnn: need >= 2 labeled spectra per phase");
  }
  if (o.epochs < 1 || o.batch_size < 1 || o.augment_draws < 1 || o.validation_draws < 1) {
    throw ConfigError("train_cnn: epochs, batch size and draw counts must be >= 1");
  }
  const auto [train, validation] = library.split_halves();
  const std::size_t bins = library.bins();
  const int phases = library.phases();
  const double gain = default_gain(bins);

  nn::Network net = build_cnn(bins, phases, o.architecture);
  net.initialize(o.seed);
  // Final dense layer sits just before the softmax.
  for (double& w : net.params()[net.layers().size() - 2].weights) w *= o.final_layer_scale;
  nn::SgdTrainer trainer(net, {o.learning_rate, o.momentum, nn::Loss::kCrossEntropy});

  CnnTrainingReport local;
  CnnTrainingReport& rep = report ? *report : local;
  rep = {};

  std::vector<nn::Sample> samples;
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    samples.clear();
    std::uint64_t idx = 0;
    for (int l = 1; l <= phases; ++l) {
      for (const Spectrum& clean : train.phase(l)) {
        for (int d = 0; d < o.augment_draws; ++d) {
          const Spectrum noisy = add_poisson_noise(
              clean, o.noise,
              derive_seed(o.seed, stream::kTrainData, 0x40000 + static_cast<std::uint64_t>(epoch),
                          idx * 1024 + static_cast<std::uint64_t>(d)));
          samples.push_back({normalize_spectrum(noisy, gain), one_hot(l, phases)});
        }
        ++idx;
      }
    }
    if (epoch == 0) rep.initial_loss = nn::evaluate_loss(net, samples, nn::Loss::kCrossEntropy);
    Rng shuffle_rng = make_rng(derive_seed(o.seed, stream::kTrainData, 0x4ffff,
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

  CnnModel model(std::move(net), phases, gain);
  std::size_t correct = 0, total = 0;
  std::uint64_t idx = 0;
  for (int l = 1; l <= phases; ++l) {
    for (const Spectrum& clean : validation.phase(l)) {
      for (int d = 0; d < o.validation_draws; ++d) {
        const Spectrum noisy = add_poisson_noise(
            clean, o.noise,
            derive_seed(o.seed, stream::kTrainData, 0x50000, idx * 1024 + static_cast<std::uint64_t>(d)));
        if (model.classify(noisy).label == l) ++correct;
        ++total;
      }
      ++idx;
    }
  }
  rep.validation_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  if (rep.validation_accuracy < o.min_validation_accuracy) {
    std::ostringstream os;
    os << "train_cnn: validation accuracy " << rep.validation_accuracy << " below "
       << o.min_validation_accuracy << "; epoch losses:";
    for (double l : rep.epoch_loss) os << " " << l;
    throw TrainingError(os.str());
  }
  return model;
}

TwoTierClassifier::TwoTierClassifier(detector::NnrModel detector, CnnModel classifier)
    : detector_(std::move(detector)), classifier_(std::move(classifier)) {
  if (detector_.bins() != classifier_.bins()) {
    throw ConfigError("two-tier: detector and classifier expect different spectrum lengths");
  }
}

TwoTierResult TwoTierClassifier::classify(const Spectrum& z) const {
  return classify_spectrum_full(detector_, classifier_, z);
}

TwoTierResult classify_spectrum_full(const detector::NnrModel& detector, const CnnModel& classifier,
                                     const Spectrum& z) {
  const detector::DetectionResult det = detector.detect(z);
  if (det.is_ill) return {0, det.variance_metric, 0.0};
  const ClassScores scores = classifier.classify(z);
  return {scores.label, det.variance_metric, scores.max_prob};
}

}  // namespace eds::classifier
