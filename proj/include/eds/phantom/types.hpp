#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace eds {

// Phase label; 0 is the ill-spectrum class, 1..L are phases.
using Label = std::uint8_t;
inline constexpr int kMaxPhases = 100;

struct Pixel {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(const Pixel&, const Pixel&) = default;
};

// Photon counts per energy bin.
struct Spectrum {
  std::vector<double> counts;

  Spectrum() = default;
  explicit Spectrum(std::vector<double> c) : counts(std::move(c)) {}
  explicit Spectrum(std::size_t bins) : counts(bins, 0.0) {}

  std::size_t size() const { return counts.size(); }
  double total() const;
  // Nonnegative and finite everywhere.
  bool valid() const;
  friend bool operator==(const Spectrum&, const Spectrum&) = default;
};

class LabelImage {
 public:
  LabelImage() = default;
  LabelImage(int width, int height, Label fill = 0);
  LabelImage(int width, int height, std::vector<Label> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  Label at(int x, int y) const { return labels_[index(x, y)]; }
  Label& at(int x, int y) { return labels_[index(x, y)]; }
  Label operator[](std::size_t i) const { return labels_[i]; }
  Label& operator[](std::size_t i) { return labels_[i]; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  std::size_t index(Pixel p) const { return index(p.x, p.y); }
  Pixel pixel(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(width_)),
            static_cast<int>(i / static_cast<std::size_t>(width_))};
  }
  bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }

  std::span<const Label> labels() const { return labels_; }
  Label max_label() const;
  // counts[l] = number of pixels with label l, for l in [0, max_label].
  std::vector<std::size_t> histogram() const;

  friend bool operator==(const LabelImage&, const LabelImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Label> labels_;
};

// FNV-1a over dimensions and labels; identifies source images in metadata.
std::uint64_t fingerprint(const LabelImage& image);

// Clean reference spectra per phase; phases are 1-based in the API.
class PhaseLibrary {
 public:
  PhaseLibrary() = default;
  PhaseLibrary(std::size_t bins, std::vector<std::vector<Spectrum>> per_phase);

  int phases() const { return static_cast<int>(per_phase_.size()); }
  std::size_t bins() const { return bins_; }
  const std::vector<Spectrum>& phase(int label) const;
  std::size_t spectra_per_phase(int label) const { return phase(label).size(); }
  std::size_t min_spectra_per_phase() const;

  // Splits each phase's spectra into the first half and second half.
  std::pair<PhaseLibrary, PhaseLibrary> split_halves() const;

  friend bool operator==(const PhaseLibrary&, const PhaseLibrary&) = default;

 private:
  std::size_t bins_ = 0;
  std::vector<std::vector<Spectrum>> per_phase_;
};

}  // namespace eds
