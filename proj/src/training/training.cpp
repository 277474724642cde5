#include "eds/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>

#include "eds/binary_io.hpp"
#include "eds/common.hpp"

namespace eds::training {

void TrainingCorpus::merge(const TrainingCorpus& other) {
  if (other.meta.feature_version != meta.feature_version) {
    throw ConfigError("corpus: feature versions differ");
  }
  if (!pairs.empty() && !other.pairs.empty() && other.feature_count() != feature_count()) {
    throw ConfigError("corpus: feature counts differ");
  }
  pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
  for (auto s : other.meta.sources) {
    if (std::find(meta.sources.begin(), meta.sources.end(), s) == meta.sources.end()) {
      meta.sources.push_back(s);
    }
  }
  if (meta.coverage_levels.empty()) meta.coverage_levels = other.meta.coverage_levels;
  meta.samples_per_level = std::max(meta.samples_per_level, other.meta.samples_per_level);
  meta.warnings.insert(meta.warnings.end(), other.meta.warnings.begin(), other.meta.warnings.end());
}

TrainingCorpus generate_pairs(const LabelImage& truth, const PairOptions& o, std::uint64_t seed) {
  if (truth.size() < 2) throw ConfigError("generate_pairs: image too small");
  if (o.coverage_levels.empty()) throw ConfigError("generate_pairs: no coverage levels");
  for (double c : o.coverage_levels) {
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("generate_pairs: coverage levels must lie in (0, 1)");
  }
  TrainingCorpus corpus;
  corpus.meta.sources = {fingerprint(truth)};
  corpus.meta.coverage_levels = o.coverage_levels;
  corpus.meta.samples_per_level = o.samples_per_level;
  corpus.meta.seed = seed;
  const auto hist = truth.histogram();
  if (std::count_if(hist.begin(), hist.end(), [](std::size_t c) { return c > 0; }) < 2) {
    corpus.meta.warnings.push_back("generate_pairs: truth has a single label; every rd is 0");
  }

  const std::size_t total = truth.size();
  std::vector<std::uint32_t> order(total);
  for (std::size_t level = 0; level < o.coverage_levels.size(); ++level) {
    Rng rng = make_rng(derive_seed(seed, stream::kPairs, level));
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t measured = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(o.coverage_levels[level] * static_cast<double>(total))),
        1, total - 1);
    slads::MeasurementSet mask(truth.width(), truth.height());
    for (std::size_t i = 0; i < measured; ++i) {
      const Pixel p = truth.pixel(order[i]);
      mask.add(p, truth.at(p.x, p.y));
    }
    const slads::Reconstruction recon = slads::Reconstruction::build(mask, o.recon);
    const std::size_t take = std::min(o.samples_per_level, total - measured);
    for (std::size_t j = 0; j < take; ++j) {
      const std::size_t s = order[measured + j];
      const Pixel p = truth.pixel(s);
      double rd = 0.0;
      for (const auto& [i, next] : recon.preview(p, truth[s])) {
        const Label t = truth[i];
        rd += static_cast<double>(recon.labels()[i] != t) - static_cast<double>(next != t);
      }
      const slads::FeatureVector v = slads::extract_features(recon, s);
      corpus.pairs.push_back({std::vector<double>(v.begin(), v.end()), rd});
    }
  }
  return corpus;
}

slads::ErdModel fit_theta(const TrainingCorpus& corpus, double ridge_lambda) {
  const std::size_t t = corpus.feature_count();
  if (t == 0) throw TrainingError("fit_theta: empty corpus");
  if (corpus.pairs.size() < t) {
    throw TrainingError("fit_theta: " + std::to_string(corpus.pairs.size()) +
                        " pairs cannot determine " + std::to_string(t) + " coefficients");
  }
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw ConfigError("fit_theta: ridge lambda must be finite and >= 0");
  }
  const auto n = static_cast<Eigen::Index>(t);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (const TrainingPair& pair : corpus.pairs) {
    if (pair.features.size() != t) throw TrainingError("fit_theta: ragged feature vectors");
    const Eigen::Map<const Eigen::VectorXd> v(pair.features.data(), n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
    rhs += pair.rd * v;
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge_lambda;
  if (!gram.allFinite() || !rhs.allFinite()) throw TrainingError("fit_theta: non-finite features");

  // Pivoted LDLT exposes rank deficiency through its diagonal.
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  const double scale = std::max(d.maxCoeff(), 1e-300);
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-13 * scale) {
    throw TrainingError(
        "fit_theta: normal equations are singular (a feature is constant or collinear); "
        "use a positive ridge lambda");
  }
  const Eigen::VectorXd theta = ldlt.solve(rhs);
  if (!theta.allFinite()) throw TrainingError("fit_theta: solution is not finite");

  slads::ErdModel model(std::vector<double>(theta.data(), theta.data() + n),
                        corpus.meta.feature_version);
  model.training_sources = corpus.meta.sources;
  model.ridge_lambda = ridge_lambda;
  model.training_pairs = corpus.pairs.size();
  return model;
}

double mean_squared_residual(const TrainingCorpus& corpus, std::span<const double> theta) {
  if (corpus.pairs.empty()) throw InputError("residual: empty corpus");
  double sum = 0.0;
  for (const TrainingPair& p : corpus.pairs) {
    if (p.features.size() != theta.size()) throw InputError("residual: dimension mismatch");
    const double e = p.rd - std::inner_product(theta.begin(), theta.end(), p.features.begin(), 0.0);
    sum += e * e;
  }
  return sum / static_cast<double>(corpus.pairs.size());
}

namespace {
constexpr char kMagic[] = "EDSCORP1";
constexpr std::uint32_t kCorpusVersion = 1;
}  // namespace

void save_corpus(const std::filesystem::path& path, const TrainingCorpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("corpus: cannot write " + path.string());
  os.write(kMagic, 8);
  binary::write_u32(os, kCorpusVersion);
  binary::write_string(os, corpus.meta.feature_version);
  binary::write_u64(os, corpus.meta.sources.size());
  for (auto s : corpus.meta.sources) binary::write_u64(os, s);
  binary::write_u64(os, corpus.meta.coverage_levels.size());
  binary::write_f64s(os, corpus.meta.coverage_levels);
  binary::write_u64(os, corpus.meta.samples_per_level);
  binary::write_u64(os, corpus.meta.seed);
  binary::write_u64(os, corpus.meta.warnings.size());
  for (const auto& w : corpus.meta.warnings) binary::write_string(os, w);
  const std::size_t t = corpus.feature_count();
  binary::write_u64(os, t);
  binary::write_u64(os, corpus.pairs.size());
  for (const TrainingPair& p : corpus.pairs) {
    if (p.features.size() != t) throw InputError("corpus: ragged feature vectors");
    binary::write_f64s(os, p.features);
    binary::write_f64(os, p.rd);
  }
  if (!os) throw InputError("corpus: write failed for " + path.string());
}

TrainingCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("corpus: cannot open " + path.string());
  binary::expect_magic(is, kMagic, "corpus");
  if (binary::read_u32(is) != kCorpusVersion) throw InputError("corpus: unsupported version");
  TrainingCorpus c;
  c.meta.feature_version = binary::read_string(is);
  const auto count = [&](const char* what) {
    const std::uint64_t v = binary::read_u64(is);
    if (v > (std::uint64_t{1} << 24)) throw InputError(std::string("corpus: implausible ") + what);
    return static_cast<std::size_t>(v);
  };
  c.meta.sources.resize(count("source count"));
  for (auto& s : c.meta.sources) s = binary::read_u64(is);
  c.meta.coverage_levels = binary::read_f64s(is, count("level count"));
  c.meta.samples_per_level = binary::read_u64(is);
  c.meta.seed = binary::read_u64(is);
  c.meta.warnings.resize(count("warning count"));
  for (auto& w : c.meta.warnings) w = binary::read_string(is);
  const std::size_t t = binary::read_u64(is);
  const std::size_t n = binary::read_u64(is);
  if (t > 4096 || n > (std::size_t{1} << 32)) throw InputError("corpus: implausible table size");
  c.pairs.resize(n);
  for (auto& p : c.pairs) {
    p.features = binary::read_f64s(is, t);
    p.rd = binary::read_f64(is);
  }
  return c;
}

}  // namespace eds::training
