#include "eds/slads/reconstruction.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace eds::slads {

void ReconParams::validate() const {
  if (neighbors < 1 || neighbors > 64) throw ConfigError("recon: neighbors must be in [1, 64]");
  if (density_radius < 0 || density_radius > 127) {
    throw ConfigError("recon: density_radius must be in [0, 127]");
  }
  if (cell_size < 1) throw ConfigError("recon: cell_size must be >= 1");
  if (bound_refresh < 1) throw ConfigError("recon: bound_refresh must be >= 1");
}

namespace {

bool key_less(const Neighbor& a, const Neighbor& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
}

// Inserts n into the sorted list of length `size` (capacity k). Returns false
// when the list is full and n does not beat its last entry.
bool insert_sorted(Neighbor* list, std::uint8_t& size, int k, Neighbor n) {
  const auto cap = static_cast<std::uint8_t>(k);
  if (size == cap && !key_less(n, list[size - 1])) return false;
  int pos = size == cap ? size - 1 : size;
  while (pos > 0 && key_less(n, list[pos - 1])) {
    list[pos] = list[pos - 1];
    --pos;
  }
  list[pos] = n;
  if (size < cap) ++size;
  return true;
}

}  // namespace

Reconstruction::Reconstruction(int width, int height, ReconParams params)
    : params_(params), labels_(width, height, 0) {
  params_.validate();
  if (width < 1 || height < 1) throw InputError("recon: grid must be at least 1x1");
  const std::size_t n = labels_.size();
  if (n >= UINT32_MAX) throw InputError("recon: grid too large");
  measured_.assign(n, 0);
  density_.assign(n, 0);
  lists_.assign(n * static_cast<std::size_t>(params_.neighbors), Neighbor{});
  sizes_.assign(n, 0);
  grid_w_ = (width + params_.cell_size - 1) / params_.cell_size;
  grid_h_ = (height + params_.cell_size - 1) / params_.cell_size;
  cells_.resize(static_cast<std::size_t>(grid_w_) * static_cast<std::size_t>(grid_h_));
}

std::uint32_t Reconstruction::sq_dist(std::size_t a, std::size_t b) const {
  const Pixel pa = labels_.pixel(a);
  const Pixel pb = labels_.pixel(b);
  const auto dx = static_cast<std::int64_t>(pa.x - pb.x);
  const auto dy = static_cast<std::int64_t>(pa.y - pb.y);
  return static_cast<std::uint32_t>(dx * dx + dy * dy);
}

std::size_t Reconstruction::cell_of(std::size_t index) const {
  const Pixel p = labels_.pixel(index);
  return static_cast<std::size_t>(p.y / params_.cell_size) * static_cast<std::size_t>(grid_w_) +
         static_cast<std::size_t>(p.x / params_.cell_size);
}

std::span<const Neighbor> Reconstruction::neighbors(std::size_t index) const {
  const auto k = static_cast<std::size_t>(params_.neighbors);
  return {lists_.data() + index * k, sizes_[index]};
}

double Reconstruction::density(std::size_t index) const {
  const Pixel p = labels_.pixel(index);
  const int r = params_.density_radius;
  const int w = std::min(p.x + r, width() - 1) - std::max(p.x - r, 0) + 1;
  const int h = std::min(p.y + r, height() - 1) - std::max(p.y - r, 0) + 1;
  return static_cast<double>(density_[index]) / static_cast<double>(w * h);
}

Label Reconstruction::vote(std::span<const Neighbor> list, std::uint32_t override_index,
                           Label override_label) const {
  if (list.empty()) return 0;
  // At most K distinct labels; a flat scan beats a 256-slot table here.
  std::array<Label, 64> seen{};
  std::array<double, 64> weight{};
  std::size_t distinct = 0;
  for (const Neighbor& n : list) {
    const Label l = n.index == override_index ? override_label : labels_[n.index];
    const double w = 1.0 / static_cast<double>(n.d2);
    std::size_t j = 0;
    while (j < distinct && seen[j] != l) ++j;
    if (j == distinct) {
      seen[distinct] = l;
      weight[distinct] = 0.0;
      ++distinct;
    }
    weight[j] += w;
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < distinct; ++j) {
    if (weight[j] > weight[best] || (weight[j] == weight[best] && seen[j] < seen[best])) best = j;
  }
  return seen[best];
}

void Reconstruction::knn_query(std::size_t index) {
  const int k = params_.neighbors;
  Neighbor* list = lists_.data() + index * static_cast<std::size_t>(k);
  std::uint8_t& size = sizes_[index];
  size = 0;
  const Pixel p = labels_.pixel(index);
  const int cx = p.x / params_.cell_size;
  const int cy = p.y / params_.cell_size;
  const int max_ring = std::max(grid_w_, grid_h_);
  const auto visit = [&](int gx, int gy) {
    if (gx < 0 || gy < 0 || gx >= grid_w_ || gy >= grid_h_) return;
    for (std::uint32_t m :
         cells_[static_cast<std::size_t>(gy) * static_cast<std::size_t>(grid_w_) +
                static_cast<std::size_t>(gx)]) {
      insert_sorted(list, size, k, {sq_dist(index, m), m});
    }
  };
  for (int r = 0; r <= max_ring; ++r) {
    if (r >= 1 && size == k) {
      // Anything in ring r is at least (r-1)*cell+1 away along one axis.
      const std::int64_t lb = static_cast<std::int64_t>(r - 1) * params_.cell_size + 1;
      if (lb * lb > static_cast<std::int64_t>(list[k - 1].d2)) break;
    }
    if (r == 0) {
      visit(cx, cy);
      continue;
    }
    for (int gx = cx - r; gx <= cx + r; ++gx) {
      visit(gx, cy - r);
      visit(gx, cy + r);
    }
    for (int gy = cy - r + 1; gy <= cy + r - 1; ++gy) {
      visit(cx - r, gy);
      visit(cx + r, gy);
    }
  }
}

void Reconstruction::bump_density(Pixel p) {
  const int r = params_.density_radius;
  for (int y = std::max(p.y - r, 0); y <= std::min(p.y + r, height() - 1); ++y) {
    for (int x = std::max(p.x - r, 0); x <= std::min(p.x + r, width() - 1); ++x) {
      ++density_[labels_.index(x, y)];
    }
  }
}

int Reconstruction::window_radius() const {
  const int full = std::max(width(), height());
  if (bound_d2_ == UINT32_MAX) return full;
  int r = 0;
  while (static_cast<std::int64_t>(r) * r < static_cast<std::int64_t>(bound_d2_)) ++r;
  return std::min(r, full);
}

void Reconstruction::maybe_refresh_bound() {
  const auto k = static_cast<std::size_t>(params_.neighbors);
  if (count_ < k) return;
  const bool due = bound_d2_ == UINT32_MAX ||
                   adds_since_refresh_ >= static_cast<std::size_t>(params_.bound_refresh) ||
                   count_ >= 2 * count_at_refresh_;
  if (!due) return;
  std::uint32_t bound = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!measured_[i]) bound = std::max(bound, lists_[i * k + k - 1].d2);
  }
  bound_d2_ = bound;
  adds_since_refresh_ = 0;
  count_at_refresh_ = count_;
}

Reconstruction Reconstruction::build(const MeasurementSet& measurements, ReconParams params) {
  if (measurements.empty()) throw InputError("reconstruct: empty measurement set");
  Reconstruction r(measurements.width(), measurements.height(), params);
  for (const Measurement& m : measurements.entries()) {
    const std::size_t i = r.labels_.index(m.pixel);
    r.measured_[i] = 1;
    r.labels_[i] = m.label;
    r.cells_[r.cell_of(i)].push_back(static_cast<std::uint32_t>(i));
    r.bump_density(m.pixel);
  }
  r.count_ = measurements.size();
  for (std::size_t i = 0; i < r.labels_.size(); ++i) {
    if (r.measured_[i]) continue;
    r.knn_query(i);
    r.labels_[i] = r.vote(r.neighbors(i));
  }
  r.maybe_refresh_bound();
  return r;
}

UpdateDelta Reconstruction::add(Pixel p, Label label) {
  if (!labels_.contains(p)) throw InputError("recon: pixel outside the grid");
  const std::size_t s = labels_.index(p);
  if (measured_[s]) throw InputError("recon: pixel already measured");
  UpdateDelta delta;
  delta.label_changed.push_back({static_cast<std::uint32_t>(s), labels_[s]});
  measured_[s] = 1;
  labels_[s] = label;
  sizes_[s] = 0;
  cells_[cell_of(s)].push_back(static_cast<std::uint32_t>(s));
  bump_density(p);
  ++count_;

  const int k = params_.neighbors;
  const int r = window_radius();
  for (int y = std::max(p.y - r, 0); y <= std::min(p.y + r, height() - 1); ++y) {
    for (int x = std::max(p.x - r, 0); x <= std::min(p.x + r, width() - 1); ++x) {
      const std::size_t q = labels_.index(x, y);
      if (measured_[q]) continue;
      const std::uint32_t d2 = sq_dist(q, s);
      if (d2 > bound_d2_) continue;
      Neighbor* list = lists_.data() + q * static_cast<std::size_t>(k);
      if (!insert_sorted(list, sizes_[q], k, {d2, static_cast<std::uint32_t>(s)})) continue;
      delta.list_changed.push_back(static_cast<std::uint32_t>(q));
      const Label next = vote(neighbors(q));
      if (next != labels_[q]) {
        delta.label_changed.push_back({static_cast<std::uint32_t>(q), labels_[q]});
        labels_[q] = next;
      }
    }
  }
  ++adds_since_refresh_;
  maybe_refresh_bound();
  return delta;
}

std::vector<std::pair<std::uint32_t, Label>> Reconstruction::preview(Pixel p, Label label) const {
  if (!labels_.contains(p)) throw InputError("recon: pixel outside the grid");
  const std::size_t s = labels_.index(p);
  if (measured_[s]) throw InputError("recon: pixel already measured");
  std::vector<std::pair<std::uint32_t, Label>> changes;
  if (labels_[s] != label) changes.push_back({static_cast<std::uint32_t>(s), label});

  const int k = params_.neighbors;
  std::array<Neighbor, 64> scratch{};
  const int r = window_radius();
  for (int y = std::max(p.y - r, 0); y <= std::min(p.y + r, height() - 1); ++y) {
    for (int x = std::max(p.x - r, 0); x <= std::min(p.x + r, width() - 1); ++x) {
      const std::size_t q = labels_.index(x, y);
      if (q == s || measured_[q]) continue;
      const std::uint32_t d2 = sq_dist(q, s);
      if (d2 > bound_d2_) continue;
      const auto current = neighbors(q);
      std::copy(current.begin(), current.end(), scratch.begin());
      auto size = static_cast<std::uint8_t>(current.size());
      if (!insert_sorted(scratch.data(), size, k, {d2, static_cast<std::uint32_t>(s)})) continue;
      const Label next = vote({scratch.data(), size}, static_cast<std::uint32_t>(s), label);
      if (next != labels_[q]) changes.push_back({static_cast<std::uint32_t>(q), next});
    }
  }
  return changes;
}

}  // namespace eds::slads
