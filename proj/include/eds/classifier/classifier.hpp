#pragma once

#include <cstdint>
#include <vector>

#include "eds/detector/detector.hpp"
#include "eds/nn/checkpoint.hpp"
#include "eds/nn/network.hpp"
#include "eds/phantom/generate.hpp"
#include "eds/phantom/types.hpp"

namespace eds::classifier {

// Two conv + max-pool stages sharing kernel and stride, then fully connected
// layers and a final L-way dense + softmax.
struct CnnArchitecture {
  std::size_t kernel = 10;
  std::size_t stride = 2;
  std::size_t conv1_features = 8;
  std::size_t conv2_features = 16;
  std::vector<std::size_t> fc_widths{100, 32, 8};
  nn::Padding padding = nn::Padding::kSame;
};

// Length of the flattened conv stack output for `bins` inputs.
std::size_t flat_width(std::size_t bins, const CnnArchitecture& arch);

nn::Network build_cnn(std::size_t bins, int phases, const CnnArchitecture& arch);

struct ClassScores {
  std::vector<double> probs;  // probs[i] belongs to label i + 1
  Label label = 1;            // argmax, lowest label on ties
  double max_prob = 0.0;
};

ClassScores scores_from_probs(std::vector<double> probs);

class CnnModel {
 public:
  CnnModel(nn::Network net, int phases, double gain);

  // Never returns label 0; screening ill spectra is the detector's job.
  ClassScores classify(const Spectrum& z) const;

  const nn::Network& network() const { return net_; }
  int phases() const { return phases_; }
  std::size_t bins() const { return net_.input_shape().length; }
  double gain() const { return gain_; }

  nn::Checkpoint to_checkpoint() const;
  static CnnModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  nn::Network net_;
  int phases_;
  double gain_;
};

struct CnnOptions {
  CnnArchitecture architecture{};
  int epochs = 12;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  int augment_draws = 8;
  int validation_draws = 20;
  double min_validation_accuracy = 0.99;
  double final_layer_scale = 0.01;  // shrinks initial logits so the start loss is ~ln L
  NoiseModel noise{};
  std::uint64_t seed = 1;
};

struct CnnTrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  double validation_accuracy = 0.0;
};

// Trains on the first half of each phase's clean spectra with fresh noise per
// epoch and validates on noisy draws of the second half.
CnnModel train_cnn(const PhaseLibrary& library, const CnnOptions& options,
                   CnnTrainingReport* report = nullptr);

// ---------------------------------------------------------------------------
// Two-tier system: detection then classification.

struct TwoTierResult {
  Label label = 0;
  double variance_metric = 0.0;
  double max_prob = 0.0;  // 0 when the detector fired
};

class TwoTierClassifier {
 public:
  TwoTierClassifier(detector::NnrModel detector, CnnModel classifier);

  TwoTierResult classify(const Spectrum& z) const;

  const detector::NnrModel& detector() const { return detector_; }
  const CnnModel& classifier() const { return classifier_; }
  int phases() const { return classifier_.phases(); }
  std::size_t bins() const { return classifier_.bins(); }

 private:
  detector::NnrModel detector_;
  CnnModel classifier_;
};

TwoTierResult classify_spectrum_full(const detector::NnrModel& detector, const CnnModel& classifier,
                                     const Spectrum& z);

}  // namespace eds::classifier
