#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "eds/phantom/types.hpp"
#include "eds/slads/measurement.hpp"

namespace eds::slads {

struct ReconParams {
  int neighbors = 10;       // K
  int density_radius = 5;   // half-width of the square density window
  int cell_size = 8;        // grid bucket edge, pixels
  int bound_refresh = 256;  // adds between refreshes of the search radius bound
  void validate() const;
};

// Measured neighbour of a pixel. Lists are ordered by (d2, index).
struct Neighbor {
  std::uint32_t d2 = 0;
  std::uint32_t index = 0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct UpdateDelta {
  // Unmeasured pixels whose neighbour list gained the new measurement.
  std::vector<std::uint32_t> list_changed;
  // (pixel, label before the update) for every pixel whose label may have
  // changed; always starts with the measured pixel itself.
  std::vector<std::pair<std::uint32_t, Label>> label_changed;
};

// Label map interpolated from scattered measurements: each unmeasured pixel
// takes the inverse-squared-distance weighted mode of its K nearest measured
// pixels (ties to the lowest label). Measured pixels keep their label.
//
// Updates are incremental and exact: a new measurement can only enter the
// list of a pixel whose K-th neighbour is at least as far, so only a window
// bounded by the largest K-th neighbour distance is scanned.
class Reconstruction {
 public:
  Reconstruction(int width, int height, ReconParams params = {});

  // Batch construction; InputError on an empty set.
  static Reconstruction build(const MeasurementSet& measurements, ReconParams params = {});

  UpdateDelta add(Pixel p, Label label);

  // Labels that would change if p were measured as `label`, as
  // (pixel, new label); state is untouched. p must be unmeasured.
  std::vector<std::pair<std::uint32_t, Label>> preview(Pixel p, Label label) const;

  int width() const { return labels_.width(); }
  int height() const { return labels_.height(); }
  const ReconParams& params() const { return params_; }
  const LabelImage& labels() const { return labels_; }
  bool measured(std::size_t index) const { return measured_[index] != 0; }
  std::size_t measured_count() const { return count_; }
  const std::vector<std::uint8_t>& measured_mask() const { return measured_; }

  // Empty for measured pixels.
  std::span<const Neighbor> neighbors(std::size_t index) const;
  // Measured pixels inside the clipped density window around `index`.
  int density_count(std::size_t index) const { return density_[index]; }
  // density_count over the clipped window area.
  double density(std::size_t index) const;

  // Vote over a neighbour list; `override_index` (if in the list) is read
  // as `override_label`.
  Label vote(std::span<const Neighbor> list, std::uint32_t override_index = UINT32_MAX,
             Label override_label = 0) const;

 private:
  std::uint32_t sq_dist(std::size_t a, std::size_t b) const;
  std::size_t cell_of(std::size_t index) const;
  void knn_query(std::size_t index);
  void bump_density(Pixel p);
  int window_radius() const;
  void maybe_refresh_bound();

  ReconParams params_;
  LabelImage labels_;
  std::vector<std::uint8_t> measured_;
  std::vector<std::uint16_t> density_;
  std::vector<Neighbor> lists_;  // K slots per pixel
  std::vector<std::uint8_t> sizes_;
  int grid_w_ = 0;
  int grid_h_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::size_t count_ = 0;
  // Upper bound on the K-th neighbour d2 over unmeasured pixels; UINT32_MAX
  // until every pixel has K neighbours.
  std::uint32_t bound_d2_ = UINT32_MAX;
  std::size_t adds_since_refresh_ = 0;
  std::size_t count_at_refresh_ = 0;
};

}  // namespace eds::slads
