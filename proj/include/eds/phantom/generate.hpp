#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eds/common.hpp"
#include "eds/phantom/types.hpp"

namespace eds {

// ---------------------------------------------------------------------------
// Label images

enum class Morphology {
  kHalfPlane,  // L vertical bands of equal width
  kLamellar,   // wavy eutectic-like lamellae
  kBlobs,      // argmax of L smooth random fields
};

Morphology parse_morphology(const std::string& name);
std::string to_string(Morphology m);

// Lengths are fractions of the image size, so one seed gives the same
// structure at every resolution.
struct MorphologyParams {
  Morphology kind = Morphology::kLamellar;
  double feature_scale = 0.6;  // lamella period or blob correlation length
  double waviness = 0.15;       // lamella bend amplitude, in periods
  int blob_bumps = 6;           // random bumps per phase field
};

// Every phase 1..L is guaranteed to cover >= 1% of the pixels.
LabelImage synth_label_image(int size, int phases, const MorphologyParams& params,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Phase spectra

struct PeakDef {
  double center = 0.0;     // bin
  double amplitude = 0.0;  // counts at the centre
  double width = 1.0;      // gaussian sigma, bins
};

struct SpectrumParams {
  double background_level = 30.0;  // continuum maximum, counts
  int peaks_per_phase = 4;
  double peak_min = 150.0;
  double peak_max = 600.0;
  double peak_width = 0.0;  // sigma in bins; 0 selects max(1, p / 400)
  double amplitude_jitter = 0.15;
  double background_jitter = 0.10;
  double intensity_jitter = 0.10;
  std::uint64_t layout_seed = 7;  // phase identities (peak positions)
  // Optional per-phase peak lists replacing the random layout.
  std::vector<std::vector<PeakDef>> explicit_peaks;
};

// Bremsstrahlung-like continuum shape on [0, 1), max-normalized.
std::vector<double> continuum_shape(std::size_t bins);

// Peak layout of each phase (centres are disjoint across phases).
std::vector<std::vector<PeakDef>> phase_peak_layout(int phases, std::size_t bins,
                                                    const SpectrumParams& params);

// `seed` selects the realizations; `params.layout_seed` selects the phases,
// so two libraries with different seeds describe the same materials.
PhaseLibrary synth_phase_spectra(int phases, int spectra_per_phase, std::size_t bins,
                                 const SpectrumParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Noise

enum class NoiseMode {
  kScaled,  // Poisson(c * lambda) / lambda
  kOffset,  // Poisson(c) + Poisson(lambda)
};

NoiseMode parse_noise_mode(const std::string& name);
std::string to_string(NoiseMode m);

struct NoiseModel {
  NoiseMode mode = NoiseMode::kScaled;
  double lambda = 2.0;
};

inline constexpr double kIllSpectrumLambda = 20.0;

Spectrum add_poisson_noise(const Spectrum& clean, const NoiseModel& model, Rng& rng);
Spectrum add_poisson_noise(const Spectrum& clean, const NoiseModel& model,
                           std::uint64_t seed);

// i.i.d. Poisson(lambda) counts in every bin.
Spectrum gen_ill_spectrum(std::size_t bins, double lambda, Rng& rng);
Spectrum gen_ill_spectrum(std::size_t bins, double lambda, std::uint64_t seed);

}  // namespace eds
