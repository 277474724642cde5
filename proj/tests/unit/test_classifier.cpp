#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <random>

#include "eds/classifier/classifier.hpp"

using namespace eds;
using namespace eds::classifier;

namespace {

constexpr std::size_t kBins = 256;

class TrainedTwoTier : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    for (int phases : {2, 4}) {
      const PhaseLibrary lib = synth_phase_spectra(phases, 24, kBins, {}, 40 + phases);
      detector::NnrOptions nnr;
      nnr.epochs = 12;
      nnr.seed = 3;
      CnnOptions cnn;
      cnn.seed = 4;
      auto two = TwoTierClassifier(detector::train_nnr(lib, nnr), train_cnn(lib, cnn, &cnn_report_[phases]));
      (phases == 2 ? two_ : four_).emplace(std::move(two));
      (phases == 2 ? lib2_ : lib4_).emplace(lib);
    }
  }
  static void TearDownTestSuite() {
    two_.reset();
    four_.reset();
  }
  static inline std::optional<TwoTierClassifier> two_, four_;
  static inline std::optional<PhaseLibrary> lib2_, lib4_;
  static inline CnnTrainingReport cnn_report_[5];
};

}  // namespace

TEST(Architecture, PaperDimensionsAt2040) {
  const CnnArchitecture arch;
  EXPECT_EQ(flat_width(2040, arch), 2048u);
  const nn::Network net = build_cnn(2040, 4, arch);
  std::vector<std::size_t> dense_out;
  for (const auto& l : net.layers()) {
    if (l.kind == nn::LayerKind::kDense) dense_out.push_back(l.out_features);
  }
  EXPECT_EQ(dense_out, (std::vector<std::size_t>{100, 32, 8, 4}));
  EXPECT_EQ(net.layers()[6].in_features, 2048u);
  EXPECT_EQ(net.layers().back().kind, nn::LayerKind::kSoftmax);
  EXPECT_EQ(net.shapes()[5], (nn::Shape{16, 128}));
}

TEST(Architecture, FlatWidthFollowsCeilDivision) {
  const CnnArchitecture arch;
  // 256 -> 128 -> 64 -> 32 -> 16 channels * 16
  EXPECT_EQ(flat_width(256, arch), 256u);
  CnnArchitecture valid = arch;
  valid.padding = nn::Padding::kValid;
  EXPECT_EQ(flat_width(2040, valid), 1920u);
}

TEST(Architecture, FeatureMultipleConstraint) {
  CnnArchitecture arch;
  arch.conv2_features = 12;
  EXPECT_THROW(build_cnn(256, 2, arch), ConfigError);
  EXPECT_THROW(build_cnn(256, 1, CnnArchitecture{}), ConfigError);
}

TEST(Scores, TiesGoToLabelOne) {
  const auto s = scores_from_probs({0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(s.label, 1);
  EXPECT_EQ(s.max_prob, 0.25);
  EXPECT_EQ(scores_from_probs({0.2, 0.4, 0.4}).label, 2);
}

TEST(Scores, ArgmaxInvariantUnderIncreasingTransforms) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> logits(5), moved(5);
    for (std::size_t i = 0; i < 5; ++i) {
      logits[i] = u(rng);
      moved[i] = std::exp(logits[i]) * 3.0 - 1.0;
    }
    const Label a = scores_from_probs(nn::softmax(nn::Tensor(logits)).vector()).label;
    const Label b = scores_from_probs(nn::softmax(nn::Tensor(moved)).vector()).label;
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, static_cast<Label>(nn::argmax(logits) + 1));
  }
}

TEST(CnnModel, UntrainedProbsFormADistribution) {
  nn::Network net = build_cnn(kBins, 3, {});
  net.initialize(2);
  const CnnModel model(net, 3, default_gain(kBins));
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    Spectrum z(kBins);
    for (double& c : z.counts) c = std::uniform_real_distribution<double>(0.0, 30.0)(rng);
    const auto s = model.classify(z);
    double sum = 0.0;
    for (double p : s.probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GE(s.label, 1);
    EXPECT_LE(s.label, 3);
  }
  EXPECT_THROW(model.classify(Spectrum(kBins - 1)), InputError);
}

TEST(CnnModel, ConstructorValidation) {
  nn::Network net = build_cnn(kBins, 3, {});
  EXPECT_THROW(CnnModel(net, 2, 1.0), ConfigError);
  EXPECT_THROW(CnnModel(net, 3, 0.0), ConfigError);
  nn::Network no_softmax({1, 4}, {nn::LayerSpec::dense(4, 3)});
  EXPECT_THROW(CnnModel(no_softmax, 3, 1.0), ConfigError);
}

TEST(TwoTier, MismatchedLengthsAreConfigErrors) {
  nn::Network cnn = build_cnn(kBins, 2, {});
  nn::Network nnr({1, 128}, {nn::LayerSpec::dense(128, 4)});
  EXPECT_THROW(TwoTierClassifier(detector::NnrModel(nnr, detector::NnrModel::ramp_line(4), 1.0, 1.0),
                                 CnnModel(cnn, 2, 1.0)),
               ConfigError);
}

TEST(TwoTier, DetectorRunsFirst) {
  // A detector with a huge residual spread on every input flags everything.
  nn::Network nnr({1, kBins}, {nn::LayerSpec::dense(kBins, 4)});
  nnr.params()[0].bias = {100.0, -50.0, 7.0, 0.0};
  nn::Network cnn = build_cnn(kBins, 2, {});
  cnn.initialize(1);
  const detector::NnrModel det(nnr, detector::NnrModel::ramp_line(4), 1e-6, 1.0);
  const CnnModel cls(cnn, 2, 1.0);
  const auto r = classify_spectrum_full(det, cls, Spectrum(std::vector<double>(kBins, 3.0)));
  EXPECT_EQ(r.label, 0);
  EXPECT_EQ(r.max_prob, 0.0);
  EXPECT_GT(r.variance_metric, 1e-6);
}

TEST_F(TrainedTwoTier, CleanLibrarySpectraGetTheirLabel) {
  for (const auto* pair : {&*two_, &*four_}) {
    const PhaseLibrary& lib = pair == &*two_ ? *lib2_ : *lib4_;
    for (int l = 1; l <= lib.phases(); ++l) {
      for (const auto& s : lib.phase(l)) EXPECT_EQ(pair->classifier().classify(s).label, l);
    }
  }
}

TEST_F(TrainedTwoTier, ValidationAccuracyMeetsTarget) {
  EXPECT_GE(cnn_report_[2].validation_accuracy, 0.99);
  EXPECT_GE(cnn_report_[4].validation_accuracy, 0.99);
  // Small final-layer init: start loss close to ln L.
  EXPECT_NEAR(cnn_report_[2].initial_loss, std::log(2.0), 0.1);
  EXPECT_NEAR(cnn_report_[4].initial_loss, std::log(4.0), 0.1);
}

TEST_F(TrainedTwoTier, HeldOutEndToEndRates) {
  for (const auto* pair : {&*two_, &*four_}) {
    const int phases = pair->phases();
    const PhaseLibrary held_out = synth_phase_spectra(phases, 24, kBins, {}, 900 + phases);
    Rng rng(12);
    const int n = 400;
    int valid_wrong = 0, ill_wrong = 0;
    for (int i = 0; i < n; ++i) {
      const int l = 1 + i % phases;
      const auto& clean = held_out.phase(l)[static_cast<std::size_t>(i / phases % 24)];
      if (pair->classify(add_poisson_noise(clean, {}, rng)).label != l) ++valid_wrong;
      if (pair->classify(gen_ill_spectrum(kBins, kIllSpectrumLambda, rng)).label != 0) ++ill_wrong;
    }
    EXPECT_LE(valid_wrong * 100, n) << phases << " phases";
    EXPECT_LE(ill_wrong * 100, n) << phases << " phases";
  }
}

TEST_F(TrainedTwoTier, CheckpointRoundTripKeepsLabels) {
  const auto& pair = *four_;
  const CnnModel cls = CnnModel::from_checkpoint(pair.classifier().to_checkpoint());
  const auto det = detector::NnrModel::from_checkpoint(pair.detector().to_checkpoint());
  const TwoTierClassifier back(det, cls);
  Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    const Spectrum z = i % 5 == 0 ? gen_ill_spectrum(kBins, kIllSpectrumLambda, rng)
                                  : add_poisson_noise(lib4_->phase(1 + i % 4)[0], {}, rng);
    const auto a = pair.classify(z);
    const auto b = back.classify(z);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.max_prob, b.max_prob);
  }
  nn::Checkpoint wrong = pair.classifier().to_checkpoint();
  wrong.tags["model"] = "nnr-detector";
  EXPECT_THROW(CnnModel::from_checkpoint(wrong), InputError);
}

TEST(TrainCnn, RejectsBadOptions) {
  CnnOptions o;
  o.epochs = 0;
  EXPECT_THROW(train_cnn(synth_phase_spectra(2, 4, kBins, {}, 1), o), ConfigError);
}

TEST(TrainCnn, UnreachableAccuracyIsATrainingError) {
  CnnOptions o;
  o.epochs = 1;
  o.learning_rate = 0.0;
  o.min_validation_accuracy = 1.0;
  EXPECT_THROW(train_cnn(synth_phase_spectra(4, 8, kBins, {}, 1), o), TrainingError);
}
