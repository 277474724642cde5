#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eds/nn/checkpoint.hpp"
#include "eds/nn/network.hpp"
#include "eds/phantom/generate.hpp"
#include "eds/phantom/types.hpp"

namespace eds {

// Scales a spectrum to unit total count times `gain`. A zero spectrum maps to
// zeros.
nn::Tensor normalize_spectrum(const Spectrum& z, double gain);

// sqrt(p): keeps the input norm O(1) so plain SGD stays stable on deep stacks.
double default_gain(std::size_t bins);

namespace detector {

struct DetectionResult {
  double variance_metric = 0.0;
  bool is_ill = false;
};

// Regression network projecting valid spectra onto a fixed target line; the
// spread of |line - output| flags spectra unlike the training phases.
class NnrModel {
 public:
  NnrModel(nn::Network net, std::vector<double> line, double threshold, double gain);

  // f_i = i / (Q - 1).
  static std::vector<double> ramp_line(std::size_t q);

  // g = |f - net(z)| elementwise.
  std::vector<double> residual(const Spectrum& z) const;
  // Population variance of the residual magnitudes; always >= 0.
  double variance_metric(const Spectrum& z) const;
  // Ill iff variance_metric > threshold; equality counts as valid.
  DetectionResult detect(const Spectrum& z) const;

  const nn::Network& network() const { return net_; }
  std::span<const double> line() const { return line_; }
  double threshold() const { return threshold_; }
  void set_threshold(double t);
  double gain() const { return gain_; }
  std::size_t bins() const { return net_.input_shape().length; }

  nn::Checkpoint to_checkpoint() const;
  static NnrModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  nn::Network net_;
  std::vector<double> line_;
  double threshold_;
  double gain_;
};

// Mean and variance by two separate passes; population normalization (1/Q).
double residual_variance(std::span<const double> g);

struct NnrOptions {
  std::size_t hidden_layers = 5;
  std::size_t hidden_width = 100;
  std::size_t output_width = 100;  // Q
  int epochs = 30;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  int augment_draws = 8;             // noisy draws of each training spectrum per epoch
  int validation_draws = 20;         // noisy draws of each validation spectrum
  int calibration_ill = 400;         // ill spectra for threshold calibration
  double max_validation_mse = 0.02;  // mean (f_i - f^_i)^2 on validation; above = failure
  NoiseModel noise{};
  double ill_lambda = kIllSpectrumLambda;
  std::uint64_t seed = 1;
};

struct NnrTrainingReport {
  std::vector<double> epoch_loss;
  double validation_mse = 0.0;
  double valid_p99 = 0.0;  // 99th percentile of sigma^2 on valid validation spectra
  double ill_p01 = 0.0;    // 1st percentile of sigma^2 on calibration ill spectra
  bool separated = false;  // valid_p99 < ill_p01
};

// Trains on the first half of each phase's clean spectra (noised afresh every
// epoch) and calibrates the threshold on the second half.
NnrModel train_nnr(const PhaseLibrary& library, const NnrOptions& options,
                   NnrTrainingReport* report = nullptr);

// Geometric midpoint of the two percentiles.
double calibrate_threshold(std::vector<double> valid_sigma2, std::vector<double> ill_sigma2,
                           double* valid_p99 = nullptr, double* ill_p01 = nullptr);

// Nearest-rank percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

}  // namespace detector
}  // namespace eds
