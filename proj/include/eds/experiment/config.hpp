#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eds/classifier/classifier.hpp"
#include "eds/detector/detector.hpp"
#include "eds/phantom/generate.hpp"
#include "eds/slads/sampler.hpp"
#include "eds/training/training.hpp"

namespace eds::experiment {

// Everything that determines a run. Text form is one `key = value` per line,
// '#' starts a comment, and unknown keys are errors.
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 1;           // test phantom, its spectra, and sampling
  std::uint64_t train_seed = 1001;  // training phantoms, libraries and networks
  std::string out_dir = "eds_run";

  // Phantom
  int size = 128;
  int phases = 2;
  MorphologyParams morphology{};
  double noise_fraction = 0.01;

  // Spectra
  std::size_t bins = 2040;
  int spectra_per_phase = 24;
  SpectrumParams spectra{};
  NoiseModel noise{};
  double ill_lambda = kIllSpectrumLambda;

  detector::NnrOptions nnr{};
  classifier::CnnOptions cnn{};

  slads::SamplingConfig sampling{};
  int train_images = 3;
  training::PairOptions pairs{};
  double ridge_lambda = 1e-6;

  int snapshot_stride = 0;  // 0 disables mask/reconstruction snapshots
  bool run_baseline = true;

  // ConfigError on any inconsistent value.
  void validate() const;

  // Applies one key; ConfigError on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);

  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Lossless: parse(to_text()) reproduces every field.
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  static std::vector<std::string> keys();
};

}  // namespace eds::experiment
