#include "eds/phantom/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eds/common.hpp"

namespace eds {

double Spectrum::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

bool Spectrum::valid() const {
  return std::all_of(counts.begin(), counts.end(),
                     [](double c) { return std::isfinite(c) && c >= 0.0; });
}

LabelImage::LabelImage(int width, int height, Label fill)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InputError("label image: non-positive dimensions");
  labels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

LabelImage::LabelImage(int width, int height, std::vector<Label> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width <= 0 || height <= 0) throw InputError("label image: non-positive dimensions");
  if (labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InputError("label image: label count does not match dimensions");
  }
}

Label LabelImage::max_label() const {
  return labels_.empty() ? Label{0} : *std::max_element(labels_.begin(), labels_.end());
}

std::vector<std::size_t> LabelImage::histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(max_label()) + 1, 0);
  for (Label l : labels_) ++h[l];
  return h;
}

std::uint64_t fingerprint(const LabelImage& image) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix((static_cast<std::uint32_t>(image.width()) >> shift) & 0xff);
    mix((static_cast<std::uint32_t>(image.height()) >> shift) & 0xff);
  }
  for (Label l : image.labels()) mix(l);
  return h;
}

PhaseLibrary::PhaseLibrary(std::size_t bins, std::vector<std::vector<Spectrum>> per_phase)
    : bins_(bins), per_phase_(std::move(per_phase)) {
  if (per_phase_.empty()) throw ConfigError("phase library: no phases");
  if (per_phase_.size() > static_cast<std::size_t>(kMaxPhases)) {
    throw ConfigError("phase library: too many phases");
  }
  for (std::size_t l = 0; l < per_phase_.size(); ++l) {
    if (per_phase_[l].empty()) {
      throw ConfigError("phase library: phase " + std::to_string(l + 1) + " has no spectra");
    }
    for (const Spectrum& s : per_phase_[l]) {
      if (s.size() != bins_) throw ConfigError("phase library: spectrum length mismatch");
      if (!s.valid()) throw ConfigError("phase library: negative or non-finite counts");
    }
  }
}

const std::vector<Spectrum>& PhaseLibrary::phase(int label) const {
  if (label < 1 || label > phases()) {
    throw ConfigError("phase library: phase " + std::to_string(label) + " not present");
  }
  return per_phase_[static_cast<std::size_t>(label - 1)];
}

std::size_t PhaseLibrary::min_spectra_per_phase() const {
  std::size_t m = per_phase_.empty() ? 0 : per_phase_.front().size();
  for (const auto& p : per_phase_) m = std::min(m, p.size());
  return m;
}

std::pair<PhaseLibrary, PhaseLibrary> PhaseLibrary::split_halves() const {
  if (min_spectra_per_phase() < 2) {
    throw ConfigError("phase library: need >= 2 spectra per phase to split");
  }
  std::vector<std::vector<Spectrum>> first, second;
  for (const auto& p : per_phase_) {
    const std::size_t half = p.size() / 2;
    first.emplace_back(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(half));
    second.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(half), p.end());
  }
  return {PhaseLibrary(bins_, std::move(first)), PhaseLibrary(bins_, std::move(second))};
}

}  // namespace eds
