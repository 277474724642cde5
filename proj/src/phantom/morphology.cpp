#include <array>
#include <cmath>
#include <numbers>

#include "eds/phantom/generate.hpp"

namespace eds {

Morphology parse_morphology(const std::string& name) {
  if (name == "halfplane") return Morphology::kHalfPlane;
  if (name == "lamellar") return Morphology::kLamellar;
  if (name == "blobs") return Morphology::kBlobs;
  throw ConfigError("unknown morphology '" + name + "'");
}

std::string to_string(Morphology m) {
  switch (m) {
    case Morphology::kHalfPlane: return "halfplane";
    case Morphology::kLamellar: return "lamellar";
    case Morphology::kBlobs: return "blobs";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

LabelImage half_plane(int size, int phases) {
  LabelImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      img.at(x, y) = static_cast<Label>(1 + (x * phases) / size);
    }
  }
  return img;
}

LabelImage lamellar(int size, int phases, const MorphologyParams& params, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = unit(rng) * std::numbers::pi;
  const double offset = unit(rng);
  std::array<double, 3> freq{}, phase{}, weight{};
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < freq.size(); ++k) {
    freq[k] = static_cast<double>(k + 1) * (0.5 + unit(rng));
    phase[k] = kTwoPi * unit(rng);
    weight[k] = 0.3 + unit(rng);
    weight_sum += weight[k];
  }
  const double ca = std::cos(angle), sa = std::sin(angle);
  LabelImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      const double along = u * ca + v * sa;
      const double across = -u * sa + v * ca;
      double bend = 0.0;
      for (std::size_t k = 0; k < freq.size(); ++k) {
        bend += weight[k] / weight_sum * std::sin(kTwoPi * freq[k] * across + phase[k]);
      }
      const double w = along / params.feature_scale + params.waviness * bend + offset;
      const double frac = w - std::floor(w);
      const int band = std::min(phases - 1, static_cast<int>(frac * phases));
      img.at(x, y) = static_cast<Label>(1 + band);
    }
  }
  return img;
}

LabelImage blobs(int size, int phases, const MorphologyParams& params, Rng& rng) {
  struct Bump {
    double cx, cy, amp, inv_two_sigma2;
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<Bump>> fields(static_cast<std::size_t>(phases));
  for (auto& field : fields) {
    for (int b = 0; b < params.blob_bumps; ++b) {
      const double sigma = params.feature_scale * (0.6 + 0.8 * unit(rng));
      field.push_back({-0.1 + 1.2 * unit(rng), -0.1 + 1.2 * unit(rng), 0.5 + unit(rng),
                       1.0 / (2.0 * sigma * sigma)});
    }
  }
  LabelImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size;
      const double v = (y + 0.5) / size;
      int best = 0;
      double best_value = -1.0;
      for (int l = 0; l < phases; ++l) {
        double value = 0.0;
        for (const Bump& b : fields[static_cast<std::size_t>(l)]) {
          const double d2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
          value += b.amp * std::exp(-d2 * b.inv_two_sigma2);
        }
        if (value > best_value) {
          best_value = value;
          best = l;
        }
      }
      img.at(x, y) = static_cast<Label>(1 + best);
    }
  }
  return img;
}

bool every_phase_present(const LabelImage& img, int phases, std::size_t min_count) {
  const auto hist = img.histogram();
  for (int l = 1; l <= phases; ++l) {
    if (static_cast<std::size_t>(l) >= hist.size() || hist[static_cast<std::size_t>(l)] < min_count) {
      return false;
    }
  }
  return true;
}

}  // namespace

LabelImage synth_label_image(int size, int phases, const MorphologyParams& params,
                             std::uint64_t seed) {
  if (size < 8) throw ConfigError("synth_label_image: size must be >= 8");
  if (phases < 2) throw ConfigError("synth_label_image: need >= 2 phases");
  if (phases > kMaxPhases) throw ConfigError("synth_label_image: at most 100 phases fit at 1% each");
  if (!(params.feature_scale > 0.0)) throw ConfigError("synth_label_image: feature_scale must be > 0");
  if (params.kind == Morphology::kHalfPlane && phases > size) {
    throw ConfigError("synth_label_image: more bands than columns");
  }
  if (params.kind == Morphology::kBlobs && params.blob_bumps < 1) {
    throw ConfigError("synth_label_image: blob_bumps must be >= 1");
  }
  const std::size_t pixels = static_cast<std::size_t>(size) * static_cast<std::size_t>(size);
  const std::size_t min_count = (pixels + 99) / 100;

  if (params.kind == Morphology::kHalfPlane) {
    LabelImage img = half_plane(size, phases);
    if (!every_phase_present(img, phases, min_count)) {
      throw ConfigError("synth_label_image: bands too narrow for the 1% coverage rule");
    }
    return img;
  }

  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng = make_rng(derive_seed(seed, stream::kMorphology, static_cast<std::uint64_t>(attempt)));
    LabelImage img = params.kind == Morphology::kLamellar ? lamellar(size, phases, params, rng)
                                                          : blobs(size, phases, params, rng);
    if (every_phase_present(img, phases, min_count)) return img;
  }
  throw ConfigError("synth_label_image: could not give every phase 1% coverage; "
                    "reduce the phase count or feature_scale");
}

}  // namespace eds
