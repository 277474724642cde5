#include "eds/slads/measurement.hpp"

#include <string>

namespace eds::slads {

MeasurementSet::MeasurementSet(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw InputError("measurements: grid must be at least 1x1");
  mask_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

bool MeasurementSet::contains(Pixel p) const {
  if (p.x < 0 || p.y < 0 || p.x >= width_ || p.y >= height_) return false;
  return mask_[static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(p.x)] != 0;
}

void MeasurementSet::add(Pixel p, Label label) {
  if (p.x < 0 || p.y < 0 || p.x >= width_ || p.y >= height_) {
    throw InputError("measurements: pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                     ") outside the grid");
  }
  auto& slot = mask_[static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
                     static_cast<std::size_t>(p.x)];
  if (slot) {
    throw InputError("measurements: pixel (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                     ") measured twice");
  }
  slot = 1;
  entries_.push_back({p, label});
}

std::size_t distortion(const LabelImage& x, const LabelImage& xhat) {
  if (x.width() != xhat.width() || x.height() != xhat.height()) {
    throw InputError("distortion: image dimensions differ");
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d += x[i] != xhat[i];
  return d;
}

}  // namespace eds::slads
