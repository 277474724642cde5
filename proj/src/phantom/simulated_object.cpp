#include "eds/phantom/simulated_object.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eds/binary_io.hpp"

namespace eds {

SimulatedObject SimulatedObject::build(const LabelImage& truth, PhaseLibrary library,
                                       const ObjectNoise& noise, std::uint64_t seed) {
  if (!(noise.noise_fraction >= 0.0 && noise.noise_fraction < 1.0)) {
    throw ConfigError("simulated object: noise_fraction must be in [0, 1)");
  }
  if (truth.max_label() > library.phases()) {
    throw ConfigError("simulated object: truth references phase " +
                      std::to_string(truth.max_label()) + " but library has " +
                      std::to_string(library.phases()));
  }

  SimulatedObject obj;
  obj.truth_ = truth;
  obj.bins_ = library.bins();
  obj.phases_ = library.phases();
  obj.seed_ = seed;
  obj.base_fingerprint_ = fingerprint(truth);
  obj.noise_ = noise;

  const std::size_t n = truth.size();
  const auto n_ill = static_cast<std::size_t>(
      std::floor(noise.noise_fraction * static_cast<double>(n)));
  if (n_ill > 0) {
    // Partial Fisher-Yates: the first n_ill entries are a uniform subset.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(seed, stream::kNoisePixels));
    for (std::size_t i = 0; i < n_ill; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
      obj.truth_[order[i]] = 0;
    }
  }

  obj.source_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = obj.truth_[i];
    if (l == 0) continue;
    const std::size_t m = library.spectra_per_phase(l);
    Rng rng = make_rng(derive_seed(seed, stream::kPixelSpectrum, i, 0));
    obj.source_[i] = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, m - 1)(rng));
  }
  obj.library_ = std::move(library);
  return obj;
}

SimulatedObject SimulatedObject::from_dense(LabelImage truth, std::size_t bins, int phases,
                                            std::vector<double> spectra, std::uint64_t seed,
                                            std::uint64_t base_fingerprint) {
  if (spectra.size() != truth.size() * bins) {
    throw InputError("simulated object: spectra size does not match N*N*p");
  }
  if (phases < truth.max_label()) throw InputError("simulated object: truth exceeds phase count");
  SimulatedObject obj;
  obj.truth_ = std::move(truth);
  obj.bins_ = bins;
  obj.phases_ = phases;
  obj.seed_ = seed;
  obj.base_fingerprint_ = base_fingerprint;
  obj.dense_ = std::move(spectra);
  return obj;
}

SimulatedObject SimulatedObject::from_file(LabelImage truth, std::size_t bins, int phases,
                                           const std::filesystem::path& path, std::uint64_t seed,
                                           std::uint64_t base_fingerprint) {
  if (phases < truth.max_label()) throw InputError("simulated object: truth exceeds phase count");
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec || bytes != truth.size() * bins * sizeof(double)) {
    throw InputError("simulated object: " + path.string() + " does not hold N*N*p float64 values");
  }
  SimulatedObject obj;
  obj.file_ = std::make_shared<std::ifstream>(path, std::ios::binary);
  if (!*obj.file_) throw InputError("simulated object: cannot open " + path.string());
  obj.truth_ = std::move(truth);
  obj.bins_ = bins;
  obj.phases_ = phases;
  obj.seed_ = seed;
  obj.base_fingerprint_ = base_fingerprint;
  return obj;
}

Spectrum SimulatedObject::spectrum(std::size_t index) const {
  if (index >= truth_.size()) throw InputError("simulated object: pixel out of range");
  if (file_) {
    file_->clear();
    file_->seekg(static_cast<std::streamoff>(index * bins_ * sizeof(double)));
    return Spectrum(binary::read_f64s(*file_, bins_));
  }
  if (!library_) {
    const auto first = dense_.begin() + static_cast<std::ptrdiff_t>(index * bins_);
    return Spectrum(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(bins_)));
  }
  const Label l = truth_[index];
  Rng rng = make_rng(derive_seed(seed_, stream::kPixelSpectrum, index, 1));
  if (l == 0) return gen_ill_spectrum(bins_, noise_.ill_lambda, rng);
  return add_poisson_noise(library_->phase(l)[source_[index]], noise_.spectrum_noise, rng);
}

std::optional<std::uint32_t> SimulatedObject::source_index(std::size_t index) const {
  if (!library_ || truth_[index] == 0) return std::nullopt;
  return source_[index];
}

}  // namespace eds
