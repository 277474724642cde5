#include <algorithm>
#include <cmath>

#include "eds/phantom/generate.hpp"

namespace eds {

std::vector<double> continuum_shape(std::size_t bins) {
  // Kramers-like falloff with a low-energy absorption edge.
  std::vector<double> shape(bins);
  double peak = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(bins);
    const double absorb = 1.0 - std::exp(-std::pow(x / 0.06, 3.0));
    shape[i] = (1.0 - x) / (x + 0.05) * absorb;
    peak = std::max(peak, shape[i]);
  }
  if (peak > 0.0) {
    for (double& s : shape) s /= peak;
  }
  return shape;
}

namespace {

double default_width(std::size_t bins, const SpectrumParams& params) {
  return params.peak_width > 0.0 ? params.peak_width
                                 : std::max(1.0, static_cast<double>(bins) / 400.0);
}

void validate_distinct(const std::vector<std::vector<PeakDef>>& layout) {
  auto centres = [](const std::vector<PeakDef>& peaks) {
    std::vector<double> c;
    for (const auto& p : peaks) c.push_back(std::round(p.center));
    std::sort(c.begin(), c.end());
    return c;
  };
  for (std::size_t a = 0; a < layout.size(); ++a) {
    for (std::size_t b = a + 1; b < layout.size(); ++b) {
      if (centres(layout[a]) == centres(layout[b])) {
        throw ConfigError("phase spectra: phases " + std::to_string(a + 1) + " and " +
                          std::to_string(b + 1) + " have identical peak sets");
      }
    }
  }
}

}  // namespace

std::vector<std::vector<PeakDef>> phase_peak_layout(int phases, std::size_t bins,
                                                    const SpectrumParams& params) {
  if (!params.explicit_peaks.empty()) {
    if (params.explicit_peaks.size() != static_cast<std::size_t>(phases)) {
      throw ConfigError("phase spectra: explicit_peaks must list every phase");
    }
    for (const auto& peaks : params.explicit_peaks) {
      for (const auto& p : peaks) {
        if (p.center < 0.0 || p.center >= static_cast<double>(bins) || p.amplitude < 0.0 ||
            !(p.width > 0.0)) {
          throw ConfigError("phase spectra: explicit peak out of range");
        }
      }
    }
    validate_distinct(params.explicit_peaks);
    return params.explicit_peaks;
  }
  if (params.peaks_per_phase < 1) throw ConfigError("phase spectra: peaks_per_phase must be >= 1");
  if (params.peak_min < 0.0 || params.peak_max < params.peak_min) {
    throw ConfigError("phase spectra: invalid peak amplitude range");
  }
  const double width = default_width(bins, params);
  const double lo = 0.04 * static_cast<double>(bins);
  const double hi = 0.92 * static_cast<double>(bins);
  const double min_sep = 6.0 * width;
  const std::size_t total = static_cast<std::size_t>(phases) *
                            static_cast<std::size_t>(params.peaks_per_phase);
  if (static_cast<double>(total) * min_sep > 0.6 * (hi - lo)) {
    throw ConfigError("phase spectra: too many peaks for the spectrum length; "
                      "phases would overlap");
  }

  Rng rng = make_rng(derive_seed(params.layout_seed, stream::kLayout));
  std::uniform_real_distribution<double> pos(lo, hi);
  std::uniform_real_distribution<double> amp(params.peak_min, params.peak_max);
  std::vector<double> placed;
  std::vector<std::vector<PeakDef>> layout(static_cast<std::size_t>(phases));
  for (auto& peaks : layout) {
    for (int k = 0; k < params.peaks_per_phase; ++k) {
      double c = 0.0;
      bool ok = false;
      for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
        c = std::round(pos(rng));
        ok = std::all_of(placed.begin(), placed.end(),
                         [&](double other) { return std::abs(other - c) >= min_sep; });
      }
      if (!ok) throw ConfigError("phase spectra: could not place disjoint peaks");
      placed.push_back(c);
      peaks.push_back({c, amp(rng), width});
    }
  }
  validate_distinct(layout);
  return layout;
}

PhaseLibrary synth_phase_spectra(int phases, int spectra_per_phase, std::size_t bins,
                                 const SpectrumParams& params, std::uint64_t seed) {
  if (phases < 2) throw ConfigError("phase spectra: need >= 2 phases");
  if (phases > kMaxPhases) throw ConfigError("phase spectra: too many phases");
  if (spectra_per_phase < 2) throw ConfigError("phase spectra: need >= 2 spectra per phase");
  if (bins < 32) throw ConfigError("phase spectra: need >= 32 bins");
  if (params.background_level < 0.0) throw ConfigError("phase spectra: negative background");

  const auto layout = phase_peak_layout(phases, bins, params);
  const auto shape = continuum_shape(bins);

  // Per-phase continuum strength follows from the layout (mean atomic number).
  Rng layout_rng = make_rng(derive_seed(params.layout_seed, stream::kLayout, 1));
  std::uniform_real_distribution<double> bg_factor(0.8, 1.2);
  std::vector<double> phase_bg(static_cast<std::size_t>(phases));
  for (double& f : phase_bg) f = bg_factor(layout_rng);

  auto jitter = [](Rng& rng, double amount) {
    return 1.0 + std::uniform_real_distribution<double>(-amount, amount)(rng);
  };

  std::vector<std::vector<Spectrum>> per_phase(static_cast<std::size_t>(phases));
  for (int l = 0; l < phases; ++l) {
    const auto li = static_cast<std::size_t>(l);
    for (int m = 0; m < spectra_per_phase; ++m) {
      Rng rng = make_rng(derive_seed(seed, stream::kLibrary, li, static_cast<std::uint64_t>(m)));
      const double intensity = jitter(rng, params.intensity_jitter);
      const double bg = params.background_level * phase_bg[li] * jitter(rng, params.background_jitter);
      std::vector<double> amps;
      for (std::size_t k = 0; k < layout[li].size(); ++k) {
        amps.push_back(layout[li][k].amplitude * jitter(rng, params.amplitude_jitter));
      }
      Spectrum s(bins);
      for (std::size_t i = 0; i < bins; ++i) {
        double v = bg * shape[i];
        for (std::size_t k = 0; k < layout[li].size(); ++k) {
          const PeakDef& pk = layout[li][k];
          const double d = (static_cast<double>(i) - pk.center) / pk.width;
          if (std::abs(d) < 8.0) v += amps[k] * std::exp(-0.5 * d * d);
        }
        s.counts[i] = intensity * v;
      }
      per_phase[li].push_back(std::move(s));
    }
  }
  return PhaseLibrary(bins, std::move(per_phase));
}

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "scaled") return NoiseMode::kScaled;
  if (name == "offset") return NoiseMode::kOffset;
  throw ConfigError("unknown noise mode '" + name + "'");
}

std::string to_string(NoiseMode m) { return m == NoiseMode::kScaled ? "scaled" : "offset"; }

namespace {

double draw_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0.0;
  return static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
}

}  // namespace

Spectrum add_poisson_noise(const Spectrum& clean, const NoiseModel& model, Rng& rng) {
  if (!clean.valid()) throw InputError("add_poisson_noise: negative or non-finite counts");
  if (!(model.lambda > 0.0)) throw ConfigError("add_poisson_noise: lambda must be > 0");
  Spectrum out(clean.size());
  if (model.mode == NoiseMode::kScaled) {
    for (std::size_t i = 0; i < clean.size(); ++i) {
      out.counts[i] = draw_poisson(clean.counts[i] * model.lambda, rng) / model.lambda;
    }
  } else {
    for (std::size_t i = 0; i < clean.size(); ++i) {
      out.counts[i] = draw_poisson(clean.counts[i], rng) + draw_poisson(model.lambda, rng);
    }
  }
  return out;
}

Spectrum add_poisson_noise(const Spectrum& clean, const NoiseModel& model,
                           std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return add_poisson_noise(clean, model, rng);
}

Spectrum gen_ill_spectrum(std::size_t bins, double lambda, Rng& rng) {
  if (bins < 1) throw ConfigError("gen_ill_spectrum: need >= 1 bin");
  if (!(lambda > 0.0)) throw ConfigError("gen_ill_spectrum: lambda must be > 0");
  std::poisson_distribution<long long> dist(lambda);
  Spectrum out(bins);
  for (double& c : out.counts) c = static_cast<double>(dist(rng));
  return out;
}

Spectrum gen_ill_spectrum(std::size_t bins, double lambda, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return gen_ill_spectrum(bins, lambda, rng);
}

}  // namespace eds
