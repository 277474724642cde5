#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eds/phantom/types.hpp"
#include "eds/slads/features.hpp"
#include "eds/slads/reconstruction.hpp"

namespace eds::training {

struct TrainingPair {
  std::vector<double> features;
  double rd = 0.0;  // exact reduction in distortion; may be negative
};

struct CorpusMeta {
  std::string feature_version = slads::kFeatureVersion;
  std::vector<std::uint64_t> sources;  // fingerprints of the training images
  std::vector<double> coverage_levels;
  std::size_t samples_per_level = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct TrainingCorpus {
  CorpusMeta meta;
  std::vector<TrainingPair> pairs;

  // 0 when empty.
  std::size_t feature_count() const { return pairs.empty() ? 0 : pairs.front().features.size(); }
  // Appends pairs and metadata; ConfigError on mismatched feature layouts.
  void merge(const TrainingCorpus& other);
};

struct PairOptions {
  std::vector<double> coverage_levels{0.05, 0.10, 0.20, 0.40, 0.80};
  std::size_t samples_per_level = 2000;
  slads::ReconParams recon{};
};

// For each coverage level: a uniformly random mask measured with true labels,
// then up to samples_per_level random unmeasured pixels s paired with
// D(X, X^) - D(X, X^ with s measured).
TrainingCorpus generate_pairs(const LabelImage& truth, const PairOptions& options,
                              std::uint64_t seed);

// Ridge least squares over the pairs. TrainingError when the normal
// equations are singular.
slads::ErdModel fit_theta(const TrainingCorpus& corpus, double ridge_lambda = 1e-6);

// Mean squared residual of the model on the corpus.
double mean_squared_residual(const TrainingCorpus& corpus, std::span<const double> theta);

void save_corpus(const std::filesystem::path& path, const TrainingCorpus& corpus);
TrainingCorpus load_corpus(const std::filesystem::path& path);

}  // namespace eds::training
