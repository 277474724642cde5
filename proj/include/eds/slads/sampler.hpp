#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "eds/classifier/classifier.hpp"
#include "eds/phantom/simulated_object.hpp"
#include "eds/slads/features.hpp"
#include "eds/slads/measurement.hpp"
#include "eds/slads/reconstruction.hpp"

namespace eds::slads {

struct SamplingConfig {
  double initial_fraction = 0.01;
  double stop_fraction = 0.15;
  std::uint64_t seed = 1;
  ReconParams recon{};
  // ConfigError unless 0 < initial_fraction <= stop_fraction <= 1.
  void validate() const;
};

// round(fraction * width * height), at least 1.
std::size_t coverage_count(double fraction, int width, int height);

// `count` distinct pixels from the 2-D Halton sequence (bases 2, 3) with a
// seed-dependent toroidal shift.
std::vector<Pixel> halton_points(int width, int height, std::size_t count, std::uint64_t seed);

// Max over values with the lowest index winning ties; O(log n) updates.
class ArgmaxTree {
 public:
  explicit ArgmaxTree(std::size_t n);
  void set(std::size_t i, double value);
  double value(std::size_t i) const { return values_[i]; }
  // Index of the maximum; meaningless when every value is -inf.
  std::size_t argmax() const { return nodes_[1]; }
  double max() const { return values_[nodes_[1]]; }

 private:
  std::size_t better(std::size_t a, std::size_t b) const;

  std::size_t leaves_;
  std::vector<double> values_;
  std::vector<std::size_t> nodes_;
};

// Reconstruction plus the per-pixel ERD map. ERD values are maintained
// incrementally once prime() has run: after each measurement only pixels whose
// neighbour list, density window or 4-neighbour labels changed are refreshed.
class SamplingState {
 public:
  SamplingState(int width, int height, const ErdModel& model, ReconParams params = {});

  UpdateDelta add(Pixel p, Label label);
  // Computes ERD for every unmeasured pixel.
  void prime();

  // Unmeasured pixel with maximal ERD, lowest row-major index on ties;
  // nullopt when everything is measured.
  std::optional<Pixel> select_next() const;

  double erd(std::size_t index) const { return tree_.value(index); }
  const Reconstruction& reconstruction() const { return recon_; }
  const MeasurementSet& measurements() const { return measurements_; }

 private:
  void refresh(std::size_t index);

  const ErdModel& model_;
  Reconstruction recon_;
  MeasurementSet measurements_;
  ArgmaxTree tree_;
  bool primed_ = false;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

// What one measurement yields.
struct Observation {
  Label label = 0;
  double sigma2 = 0.0;  // detector variance metric; 0 when not applicable
};
using Probe = std::function<Observation(Pixel)>;

struct TraceRow {
  std::size_t k = 0;  // measurements so far, including this one
  Pixel pixel;
  Label label = 0;
  double sigma2 = 0.0;
  double td = std::numeric_limits<double>::quiet_NaN();  // NaN without truth
  bool seeded = false;  // part of the initial (non-adaptive) set
};
// Called after every measurement, seeds included.
using TraceSink = std::function<void(const TraceRow&, const Reconstruction&)>;

struct SamplingResult {
  MeasurementSet measurements;
  LabelImage reconstruction;
  std::vector<TraceRow> trace;
};

enum class Strategy {
  kSlads,   // Halton seed, then greedy ERD argmax
  kRandom,  // uniformly random pixels without replacement
};

// Generic loop; `truth` (optional) drives the per-step TD column and `model`
// is required for kSlads.
SamplingResult run_sampling(int width, int height, const Probe& probe, Strategy strategy,
                            const ErdModel* model, const SamplingConfig& config,
                            const LabelImage* truth = nullptr, const TraceSink& sink = {});

// Measures object pixels through the two-tier classifier.
SamplingResult run_slads(const SimulatedObject& object, const ErdModel& model,
                         const classifier::TwoTierClassifier& classifier,
                         const SamplingConfig& config, const TraceSink& sink = {});
SamplingResult run_random_sampling(const SimulatedObject& object,
                                   const classifier::TwoTierClassifier& classifier,
                                   const SamplingConfig& config, const TraceSink& sink = {});

// Probe that reads labels straight from a label image.
Probe truth_probe(const LabelImage& truth);

}  // namespace eds::slads
