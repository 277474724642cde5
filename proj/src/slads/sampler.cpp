#include "eds/slads/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eds::slads {

void SamplingConfig::validate() const {
  if (!(initial_fraction > 0.0) || !(initial_fraction <= stop_fraction) || !(stop_fraction <= 1.0)) {
    throw ConfigError("sampling: need 0 < initial_fraction <= stop_fraction <= 1");
  }
  recon.validate();
}

std::size_t coverage_count(double fraction, int width, int height) {
  const double n = static_cast<double>(width) * static_cast<double>(height);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
}

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

std::vector<Pixel> halton_points(int width, int height, std::size_t count, std::uint64_t seed) {
  const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (count > total) throw ConfigError("halton: more points than pixels");
  Rng rng = make_rng(derive_seed(seed, stream::kSampling, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shift_x = unit(rng);
  const double shift_y = unit(rng);
  std::vector<std::uint8_t> taken(total, 0);
  std::vector<Pixel> out;
  out.reserve(count);
  // Collisions get rarer as i grows; the cap is a safety net only.
  const std::uint64_t cap = 64 * static_cast<std::uint64_t>(total) + 1024;
  for (std::uint64_t i = 1; out.size() < count && i < cap; ++i) {
    const double u = std::fmod(radical_inverse(i, 2) + shift_x, 1.0);
    const double v = std::fmod(radical_inverse(i, 3) + shift_y, 1.0);
    const Pixel p{std::min(static_cast<int>(u * width), width - 1),
                  std::min(static_cast<int>(v * height), height - 1)};
    auto& t = taken[static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(p.x)];
    if (t) continue;
    t = 1;
    out.push_back(p);
  }
  // Only reachable for near-complete coverage of tiny grids.
  for (std::size_t i = 0; out.size() < count && i < total; ++i) {
    if (!taken[i]) {
      taken[i] = 1;
      out.push_back({static_cast<int>(i % static_cast<std::size_t>(width)),
                     static_cast<int>(i / static_cast<std::size_t>(width))});
    }
  }
  return out;
}

ArgmaxTree::ArgmaxTree(std::size_t n) : leaves_(1) {
  while (leaves_ < std::max<std::size_t>(n, 1)) leaves_ *= 2;
  values_.assign(leaves_, -std::numeric_limits<double>::infinity());
  nodes_.assign(2 * leaves_, 0);
  for (std::size_t i = 0; i < leaves_; ++i) nodes_[leaves_ + i] = i;
  for (std::size_t i = leaves_ - 1; i >= 1; --i) nodes_[i] = better(nodes_[2 * i], nodes_[2 * i + 1]);
}

std::size_t ArgmaxTree::better(std::size_t a, std::size_t b) const {
  if (values_[b] > values_[a] || (values_[b] == values_[a] && b < a)) return b;
  return a;
}

void ArgmaxTree::set(std::size_t i, double value) {
  values_[i] = value;
  for (std::size_t node = (leaves_ + i) / 2; node >= 1; node /= 2) {
    nodes_[node] = better(nodes_[2 * node], nodes_[2 * node + 1]);
  }
}

SamplingState::SamplingState(int width, int height, const ErdModel& model, ReconParams params)
    : model_(model),
      recon_(width, height, params),
      measurements_(width, height),
      tree_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)),
      stamp_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
  model_.require_compatible();
}

void SamplingState::refresh(std::size_t index) {
  if (recon_.measured(index)) {
    tree_.set(index, -std::numeric_limits<double>::infinity());
    return;
  }
  const FeatureVector v = extract_features(recon_, index);
  tree_.set(index, model_.estimate(v));
}

void SamplingState::prime() {
  const std::size_t n = recon_.labels().size();
  for (std::size_t i = 0; i < n; ++i) refresh(i);
  primed_ = true;
}

UpdateDelta SamplingState::add(Pixel p, Label label) {
  measurements_.add(p, label);
  UpdateDelta delta = recon_.add(p, label);
  if (!primed_) return delta;

  if (++epoch_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    epoch_ = 1;
  }
  const LabelImage& labels = recon_.labels();
  const auto touch = [&](std::size_t i) {
    if (stamp_[i] == epoch_) return;
    stamp_[i] = epoch_;
    refresh(i);
  };
  for (std::uint32_t i : delta.list_changed) touch(i);
  for (const auto& [i, prev] : delta.label_changed) {
    (void)prev;
    touch(i);
    const Pixel q = labels.pixel(i);
    if (q.x > 0) touch(i - 1);
    if (q.x + 1 < labels.width()) touch(i + 1);
    if (q.y > 0) touch(i - static_cast<std::size_t>(labels.width()));
    if (q.y + 1 < labels.height()) touch(i + static_cast<std::size_t>(labels.width()));
  }
  const int r = recon_.params().density_radius;
  for (int y = std::max(p.y - r, 0); y <= std::min(p.y + r, labels.height() - 1); ++y) {
    for (int x = std::max(p.x - r, 0); x <= std::min(p.x + r, labels.width() - 1); ++x) {
      touch(labels.index(x, y));
    }
  }
  return delta;
}

std::optional<Pixel> SamplingState::select_next() const {
  if (measurements_.size() == recon_.labels().size()) return std::nullopt;
  return recon_.labels().pixel(tree_.argmax());
}

Probe truth_probe(const LabelImage& truth) {
  return [&truth](Pixel p) { return Observation{truth.at(p.x, p.y), 0.0}; };
}

namespace {

// Running count of pixels where the reconstruction disagrees with truth.
class DistortionTracker {
 public:
  DistortionTracker(const LabelImage* truth, const Reconstruction& recon)
      : truth_(truth), recon_(recon) {
    if (truth_) {
      if (truth_->width() != recon.width() || truth_->height() != recon.height()) {
        throw InputError("sampling: truth dimensions differ from the sampling grid");
      }
      wrong_ = distortion(*truth_, recon.labels());
    }
  }
  void apply(const UpdateDelta& delta) {
    if (!truth_) return;
    const LabelImage& now = recon_.labels();
    for (const auto& [i, prev] : delta.label_changed) {
      const Label t = (*truth_)[i];
      wrong_ -= prev != t;
      wrong_ += now[i] != t;
    }
  }
  double td() const {
    if (!truth_) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(wrong_) / static_cast<double>(truth_->size());
  }

 private:
  const LabelImage* truth_;
  const Reconstruction& recon_;
  std::size_t wrong_ = 0;
};

}  // namespace

SamplingResult run_sampling(int width, int height, const Probe& probe, Strategy strategy,
                            const ErdModel* model, const SamplingConfig& config,
                            const LabelImage* truth, const TraceSink& sink) {
  config.validate();
  const std::size_t stop = coverage_count(config.stop_fraction, width, height);
  std::vector<TraceRow> trace;
  trace.reserve(stop);

  const auto record = [&](const UpdateDelta& delta, DistortionTracker& tracker, Pixel p,
                          const Observation& obs, std::size_t k, bool seeded,
                          const Reconstruction& recon) {
    tracker.apply(delta);
    TraceRow row{k, p, obs.label, obs.sigma2, tracker.td(), seeded};
    trace.push_back(row);
    if (sink) sink(row, recon);
  };

  if (strategy == Strategy::kRandom) {
    const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng = make_rng(derive_seed(config.seed, stream::kSampling, 1));
    MeasurementSet measurements(width, height);
    Reconstruction recon(width, height, config.recon);
    DistortionTracker tracker(truth, recon);
    for (std::size_t k = 0; k < stop; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, total - 1);
      std::swap(order[k], order[pick(rng)]);
      const Pixel p{static_cast<int>(order[k] % static_cast<std::uint32_t>(width)),
                    static_cast<int>(order[k] / static_cast<std::uint32_t>(width))};
      const Observation obs = probe(p);
      measurements.add(p, obs.label);
      record(recon.add(p, obs.label), tracker, p, obs, k + 1, false, recon);
    }
    return {std::move(measurements), recon.labels(), std::move(trace)};
  }

  if (!model) throw ConfigError("sampling: adaptive strategy needs an ERD model");
  SamplingState state(width, height, *model, config.recon);
  DistortionTracker tracker(truth, state.reconstruction());
  const std::size_t initial = std::min(coverage_count(config.initial_fraction, width, height), stop);
  std::size_t k = 0;
  for (const Pixel& p : halton_points(width, height, initial, config.seed)) {
    const Observation obs = probe(p);
    record(state.add(p, obs.label), tracker, p, obs, ++k, true, state.reconstruction());
  }
  if (k < stop) state.prime();
  while (k < stop) {
    const auto next = state.select_next();
    if (!next) break;
    const Observation obs = probe(*next);
    record(state.add(*next, obs.label), tracker, *next, obs, ++k, false, state.reconstruction());
  }
  return {state.measurements(), state.reconstruction().labels(), std::move(trace)};
}

namespace {

Probe classifier_probe(const SimulatedObject& object,
                       const classifier::TwoTierClassifier& classifier) {
  if (object.bins() != classifier.bins()) {
    throw ConfigError("sampling: object has " + std::to_string(object.bins()) +
                      " bins, models expect " + std::to_string(classifier.bins()));
  }
  if (object.phases() > classifier.phases()) {
    throw ConfigError("sampling: object has more phases than the classifier knows");
  }
  return [&object, &classifier](Pixel p) {
    const classifier::TwoTierResult r = classifier.classify(object.spectrum(p));
    return Observation{r.label, r.variance_metric};
  };
}

}  // namespace

SamplingResult run_slads(const SimulatedObject& object, const ErdModel& model,
                         const classifier::TwoTierClassifier& classifier,
                         const SamplingConfig& config, const TraceSink& sink) {
  return run_sampling(object.width(), object.height(), classifier_probe(object, classifier),
                      Strategy::kSlads, &model, config, &object.truth(), sink);
}

SamplingResult run_random_sampling(const SimulatedObject& object,
                                   const classifier::TwoTierClassifier& classifier,
                                   const SamplingConfig& config, const TraceSink& sink) {
  return run_sampling(object.width(), object.height(), classifier_probe(object, classifier),
                      Strategy::kRandom, nullptr, config, &object.truth(), sink);
}

}  // namespace eds::slads
