#pragma once

#include <cstddef>
#include <vector>

#include "eds/common.hpp"
#include "eds/phantom/types.hpp"

namespace eds::slads {

struct Measurement {
  Pixel pixel;
  Label label = 0;
  friend bool operator==(const Measurement&, const Measurement&) = default;
};

// Acquisition-ordered measurements on a width x height grid; each pixel at most
// once.
class MeasurementSet {
 public:
  MeasurementSet(int width, int height);

  // InputError when p is outside the grid or already measured.
  void add(Pixel p, Label label);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(Pixel p) const;
  const std::vector<Measurement>& entries() const { return entries_; }

  // 1 where measured, row-major.
  const std::vector<std::uint8_t>& mask() const { return mask_; }

 private:
  int width_;
  int height_;
  std::vector<Measurement> entries_;
  std::vector<std::uint8_t> mask_;
};

// Number of pixels whose labels differ. InputError on a size mismatch.
std::size_t distortion(const LabelImage& x, const LabelImage& xhat);

}  // namespace eds::slads
