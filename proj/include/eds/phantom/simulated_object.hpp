#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <vector>

#include "eds/phantom/generate.hpp"
#include "eds/phantom/types.hpp"

namespace eds {

struct ObjectNoise {
  double noise_fraction = 0.0;  // share of pixels relabeled 0 (ill-spectrum)
  NoiseModel spectrum_noise{};
  double ill_lambda = kIllSpectrumLambda;
};

// N x N grid of spectra with its ground truth. Built objects generate each
// pixel's spectrum on demand from a per-pixel stream derived from
// (seed, pixel index), so memory stays O(N^2) rather than O(N^2 p). Objects
// loaded from disk read each spectrum from the file when asked; that backend
// is not safe for concurrent reads.
class SimulatedObject {
 public:
  // Relabels floor(noise_fraction * N^2) pixels (chosen without replacement)
  // to 0 and assigns them ill-spectra; every other pixel gets a Poisson-noised
  // copy of a uniformly chosen library spectrum of its phase.
  static SimulatedObject build(const LabelImage& truth, PhaseLibrary library,
                               const ObjectNoise& noise, std::uint64_t seed);

  static SimulatedObject from_dense(LabelImage truth, std::size_t bins, int phases,
                                    std::vector<double> spectra, std::uint64_t seed,
                                    std::uint64_t base_fingerprint);
  // `path` holds N*N*p little-endian float64 values, row-major (y, x, bin).
  static SimulatedObject from_file(LabelImage truth, std::size_t bins, int phases,
                                   const std::filesystem::path& path, std::uint64_t seed,
                                   std::uint64_t base_fingerprint);

  int width() const { return truth_.width(); }
  int height() const { return truth_.height(); }
  std::size_t bins() const { return bins_; }
  int phases() const { return phases_; }
  std::uint64_t seed() const { return seed_; }
  const LabelImage& truth() const { return truth_; }
  // Fingerprint of the truth before ill pixels were injected.
  std::uint64_t base_fingerprint() const { return base_fingerprint_; }

  Spectrum spectrum(std::size_t index) const;
  Spectrum spectrum(Pixel p) const { return spectrum(truth_.index(p)); }

  // Library spectrum index used at `index` (built objects, non-ill pixels).
  std::optional<std::uint32_t> source_index(std::size_t index) const;

 private:
  SimulatedObject() = default;

  LabelImage truth_;
  std::size_t bins_ = 0;
  int phases_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t base_fingerprint_ = 0;
  // Generated backend.
  std::optional<PhaseLibrary> library_;
  ObjectNoise noise_{};
  std::vector<std::uint32_t> source_;
  // Dense backend, row-major (y, x, bin).
  std::vector<double> dense_;
  // File backend, same layout.
  std::shared_ptr<std::ifstream> file_;
};

}  // namespace eds
