#include "eds/slads/features.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace eds::slads {

FeatureVector extract_features(const Reconstruction& recon, std::size_t index) {
  if (recon.measured(index)) throw InputError("features: pixel is already measured");
  const LabelImage& labels = recon.labels();
  const Label own = labels[index];
  const auto nbrs = recon.neighbors(index);
  FeatureVector v{};
  v[5] = 1.0;
  v[1] = recon.density(index);

  if (!nbrs.empty()) {
    v[0] = 1.0 / std::sqrt(static_cast<double>(nbrs.front().d2));
    std::size_t disagree = 0;
    std::array<Label, 64> seen{};
    std::array<double, 64> weight{};
    std::size_t distinct = 0;
    double total = 0.0;
    for (const Neighbor& n : nbrs) {
      const Label l = labels[n.index];
      disagree += l != own;
      const double w = 1.0 / static_cast<double>(n.d2);
      total += w;
      std::size_t j = 0;
      while (j < distinct && seen[j] != l) ++j;
      if (j == distinct) {
        seen[distinct] = l;
        weight[distinct++] = 0.0;
      }
      weight[j] += w;
    }
    v[2] = static_cast<double>(disagree) / static_cast<double>(nbrs.size());
    double h = 0.0;
    for (std::size_t j = 0; j < distinct; ++j) {
      const double q = weight[j] / total;
      if (q > 0.0) h -= q * std::log(q);
    }
    v[3] = h;
  }

  const Pixel p = labels.pixel(index);
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  int inside = 0, differ = 0;
  for (int d = 0; d < 4; ++d) {
    const Pixel q{p.x + kDx[d], p.y + kDy[d]};
    if (!labels.contains(q)) continue;
    ++inside;
    differ += labels.at(q.x, q.y) != own;
  }
  if (inside > 0) v[4] = static_cast<double>(differ) / static_cast<double>(inside);
  return v;
}

ErdModel::ErdModel(std::vector<double> theta, std::string version)
    : theta_(std::move(theta)), version_(std::move(version)) {
  if (theta_.empty()) throw ConfigError("erd model: empty coefficient vector");
  for (double t : theta_) {
    if (!std::isfinite(t)) throw ConfigError("erd model: non-finite coefficient");
  }
}

double ErdModel::estimate(std::span<const double> v) const {
  if (v.size() != theta_.size()) {
    throw InputError("erd: feature vector has " + std::to_string(v.size()) +
                     " entries, model expects " + std::to_string(theta_.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) s += theta_[j] * v[j];
  return s;
}

double estimate_erd(const ErdModel& model, std::span<const double> v) { return model.estimate(v); }

void ErdModel::require_compatible() const {
  if (version_ != kFeatureVersion) {
    throw ConfigError("erd model: feature version '" + version_ + "' does not match extractor '" +
                      kFeatureVersion + "'");
  }
  if (theta_.size() != kFeatureCount) {
    throw ConfigError("erd model: expects " + std::to_string(theta_.size()) + " features, extractor gives " +
                      std::to_string(kFeatureCount));
  }
}

void ErdModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "eds-erd-model";
  j["version"] = 1;
  j["feature_version"] = version_;
  j["theta"] = theta_;
  j["training_sources"] = training_sources;
  j["ridge_lambda"] = ridge_lambda;
  j["training_pairs"] = training_pairs;
  std::ofstream os(path);
  if (!os) throw InputError("erd model: cannot write " + path.string());
  os << j.dump(2) << "\n";
  if (!os) throw InputError("erd model: write failed for " + path.string());
}

ErdModel ErdModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("erd model: cannot open " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(is);
    if (j.value("format", "") != "eds-erd-model") {
      throw InputError("erd model: " + path.string() + " is not an ERD model file");
    }
    ErdModel m(j.at("theta").get<std::vector<double>>(), j.at("feature_version").get<std::string>());
    m.training_sources = j.value("training_sources", std::vector<std::uint64_t>{});
    m.ridge_lambda = j.value("ridge_lambda", 0.0);
    m.training_pairs = j.value("training_pairs", std::size_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("erd model: " + path.string() + ": " + e.what());
  }
}

}  // namespace eds::slads
