#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eds/slads/reconstruction.hpp"

namespace eds::slads {

inline constexpr std::size_t kFeatureCount = 6;
// Bumped whenever the meaning or order of the features changes.
inline constexpr const char* kFeatureVersion = "knn-boundary-v1";

// 0: 1 / distance to the nearest measurement
// 1: measured fraction of the density window
// 2: fraction of the K neighbours whose label differs from the pixel's
// 3: entropy (nats) of the distance-weighted neighbour label distribution
// 4: fraction of in-bounds 4-neighbours with a different reconstructed label
// 5: constant 1
using FeatureVector = std::array<double, kFeatureCount>;

// InputError when the pixel is measured.
FeatureVector extract_features(const Reconstruction& recon, std::size_t index);

// Linear expected-reduction-in-distortion model.
class ErdModel {
 public:
  explicit ErdModel(std::vector<double> theta, std::string version = kFeatureVersion);

  // theta . v; InputError on a length mismatch.
  double estimate(std::span<const double> v) const;

  std::span<const double> theta() const { return theta_; }
  const std::string& version() const { return version_; }
  std::size_t dims() const { return theta_.size(); }

  // Fingerprints of the label images the model was trained on.
  std::vector<std::uint64_t> training_sources;
  double ridge_lambda = 0.0;
  std::size_t training_pairs = 0;

  // ConfigError unless the model fits the current feature extractor.
  void require_compatible() const;

  void save(const std::filesystem::path& path) const;
  static ErdModel load(const std::filesystem::path& path);

 private:
  std::vector<double> theta_;
  std::string version_;
};

double estimate_erd(const ErdModel& model, std::span<const double> v);

}  // namespace eds::slads
