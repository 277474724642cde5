#include "eds/experiment/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eds/experiment/metrics.hpp"
#include "eds/phantom/io.hpp"
#include "eds/training/training.hpp"

namespace eds::experiment {

namespace fs = std::filesystem;

namespace {

// Re-throws with the stage name prefixed, keeping the error category.
template <class Fn>
auto in_stage(const char* stage, std::vector<StageTiming>* timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  const auto done = [&] {
    if (timings) {
      timings->push_back(
          {stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    }
  };
  const auto tag = [&](const std::exception& e) { return std::string("[") + stage + "] " + e.what(); };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      done();
    } else {
      auto result = fn();
      done();
      return result;
    }
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const TrainingError& e) {
    throw TrainingError(tag(e));
  } catch (const InputError& e) {
    throw InputError(tag(e));
  } catch (const std::exception& e) {
    throw std::runtime_error(tag(e));
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PhaseLibrary training_library(const ExperimentConfig& c) {
  return synth_phase_spectra(c.phases, c.spectra_per_phase, c.bins, c.spectra,
                             derive_seed(c.train_seed, stream::kLibrary));
}

PhaseLibrary test_library(const ExperimentConfig& c) {
  return synth_phase_spectra(c.phases, c.spectra_per_phase, c.bins, c.spectra,
                             derive_seed(c.seed, stream::kLibrary));
}

LabelImage test_truth(const ExperimentConfig& c) {
  return synth_label_image(c.size, c.phases, c.morphology, c.seed);
}

SimulatedObject test_object(const ExperimentConfig& c) {
  return SimulatedObject::build(test_truth(c), test_library(c),
                                ObjectNoise{c.noise_fraction, c.noise, c.ill_lambda}, c.seed);
}

std::vector<LabelImage> training_images(const ExperimentConfig& c) {
  std::vector<LabelImage> out;
  for (int i = 0; i < c.train_images; ++i) {
    out.push_back(synth_label_image(c.size, c.phases, c.morphology,
                                    derive_seed(c.train_seed, stream::kMorphology,
                                                static_cast<std::uint64_t>(i))));
  }
  return out;
}

classifier::TwoTierClassifier train_two_tier(const ExperimentConfig& c) {
  const PhaseLibrary library = training_library(c);
  detector::NnrOptions nnr = c.nnr;
  nnr.noise = c.noise;
  nnr.ill_lambda = c.ill_lambda;
  nnr.seed = derive_seed(c.train_seed, stream::kNetInit, 1);
  classifier::CnnOptions cnn = c.cnn;
  cnn.noise = c.noise;
  cnn.seed = derive_seed(c.train_seed, stream::kNetInit, 2);
  return classifier::TwoTierClassifier(detector::train_nnr(library, nnr),
                                       classifier::train_cnn(library, cnn));
}

slads::ErdModel train_erd(const ExperimentConfig& c) {
  training::PairOptions pairs = c.pairs;
  pairs.recon = c.sampling.recon;
  training::TrainingCorpus corpus;
  const auto images = training_images(c);
  for (std::size_t i = 0; i < images.size(); ++i) {
    corpus.merge(training::generate_pairs(images[i], pairs,
                                          derive_seed(c.train_seed, stream::kPairs, i)));
  }
  corpus.meta.seed = c.train_seed;
  return training::fit_theta(corpus, c.ridge_lambda);
}

TrainedModels train_models(const ExperimentConfig& c, std::vector<StageTiming>* timings) {
  auto two_tier = in_stage("train-classifier", timings, [&] { return train_two_tier(c); });
  auto erd = in_stage("train-slads", timings, [&] { return train_erd(c); });
  return {std::move(two_tier), std::move(erd)};
}

void require_disjoint(const slads::ErdModel& erd, const SimulatedObject& object) {
  const std::uint64_t observed = fingerprint(object.truth());
  for (std::uint64_t fp : erd.training_sources) {
    if (fp == object.base_fingerprint() || fp == observed) {
      throw ConfigError("test object's ground truth was used to train the ERD model");
    }
  }
}

void write_trace_header(std::ostream& os) { os << "k,x,y,label,sigma2,td\n"; }

void write_trace_row(std::ostream& os, const slads::TraceRow& r) {
  os << r.k << ',' << r.pixel.x << ',' << r.pixel.y << ',' << static_cast<int>(r.label) << ','
     << fmt(r.sigma2) << ',' << fmt(r.td) << '\n';
}

void write_mask_pgm(const fs::path& path, const slads::MeasurementSet& m) {
  std::vector<std::uint8_t> px(m.mask().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = m.mask()[i] ? 255 : 0;
  io::write_gray_pgm(path, m.width(), m.height(), px);
}

void write_distortion_pgm(const fs::path& path, const LabelImage& truth, const LabelImage& recon) {
  if (truth.size() != recon.size()) throw InputError("distortion image: size mismatch");
  std::vector<std::uint8_t> px(truth.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = truth[i] != recon[i] ? 255 : 0;
  io::write_gray_pgm(path, truth.width(), truth.height(), px);
}

void RunReport::save_json(const fs::path& path) const {
  nlohmann::json j;
  j["format"] = "eds-run-report";
  j["version"] = 1;
  j["final_td"] = final_td;
  j["misclassification_rate"] = misclassification_rate;
  j["measured"] = measured;
  j["baseline_td"] = std::isnan(baseline_td) ? nlohmann::json(nullptr) : nlohmann::json(baseline_td);
  std::vector<double> cov, td;
  for (const auto& p : td_series) {
    cov.push_back(p.coverage);
    td.push_back(p.td);
  }
  j["coverage"] = cov;
  j["td"] = td;
  for (const auto& t : timings) j["seconds"][t.stage] = t.seconds;
  for (const auto& [name, p] : outputs) j["outputs"][name] = p.string();
  std::ofstream os(path);
  if (!os) throw InputError("report: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

RunReport sample_and_report(const ExperimentConfig& c, const SimulatedObject& object,
                            const TrainedModels& models) {
  RunReport report;
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  require_disjoint(models.erd, object);

  slads::SamplingConfig sampling = c.sampling;
  sampling.seed = c.seed;
  const double pixels = static_cast<double>(object.truth().size());

  const fs::path snaps = out / "snapshots";
  if (c.snapshot_stride > 0) fs::create_directories(snaps);
  const fs::path trace_path = out / "trace.csv";
  slads::SamplingResult result = in_stage("sample", &report.timings, [&] {
    std::ofstream trace(trace_path);
    if (!trace) throw InputError("cannot write " + trace_path.string());
    write_trace_header(trace);
    const auto sink = [&](const slads::TraceRow& row, const slads::Reconstruction& recon) {
      write_trace_row(trace, row);
      if (c.snapshot_stride > 0 && row.k % static_cast<std::size_t>(c.snapshot_stride) == 0) {
        char name[32];
        std::vector<std::uint8_t> px(recon.measured_mask().size());
        for (std::size_t i = 0; i < px.size(); ++i) px[i] = recon.measured_mask()[i] ? 255 : 0;
        std::snprintf(name, sizeof name, "mask_%07zu.pgm", row.k);
        io::write_gray_pgm(snaps / name, recon.width(), recon.height(), px);
        std::snprintf(name, sizeof name, "recon_%07zu.pgm", row.k);
        io::write_label_pgm(snaps / name, recon.labels(), c.phases);
      }
    };
    return slads::run_slads(object, models.erd, models.classifier, sampling, sink);
  });
  report.outputs["trace"] = trace_path;

  for (const auto& row : result.trace) report.td_series.push_back({static_cast<double>(row.k) / pixels, row.td});
  report.measured = result.measurements.size();
  report.final_td = metrics::total_distortion(object.truth(), result.reconstruction);
  {
    std::vector<Label> got, want;
    for (const auto& m : result.measurements.entries()) {
      got.push_back(m.label);
      want.push_back(object.truth().at(m.pixel.x, m.pixel.y));
    }
    report.misclassification_rate = metrics::misclassification_rate(got, want);
  }

  in_stage("write-panels", &report.timings, [&] {
    write_mask_pgm(out / "mask.pgm", result.measurements);
    io::write_label_pgm(out / "reconstruction.pgm", result.reconstruction, c.phases);
    io::write_label_pgm(out / "truth.pgm", object.truth(), c.phases);
    write_distortion_pgm(out / "distortion.pgm", object.truth(), result.reconstruction);
  });
  report.outputs["mask"] = out / "mask.pgm";
  report.outputs["reconstruction"] = out / "reconstruction.pgm";
  report.outputs["truth"] = out / "truth.pgm";
  report.outputs["distortion"] = out / "distortion.pgm";

  if (c.run_baseline) {
    const fs::path base_path = out / "baseline_trace.csv";
    const auto base = in_stage("baseline", &report.timings, [&] {
      std::ofstream trace(base_path);
      if (!trace) throw InputError("cannot write " + base_path.string());
      write_trace_header(trace);
      return slads::run_random_sampling(
          object, models.classifier, sampling,
          [&](const slads::TraceRow& row, const slads::Reconstruction&) { write_trace_row(trace, row); });
    });
    report.baseline_td = metrics::total_distortion(object.truth(), base.reconstruction);
    report.outputs["baseline_trace"] = base_path;
  }
  report.outputs["report"] = out / "report.json";
  report.save_json(out / "report.json");
  return report;
}

RunReport run_experiment(const ExperimentConfig& c, const TrainedModels& models) {
  in_stage("config", nullptr, [&] { c.validate(); });
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  c.save(out / "config.txt");
  std::vector<StageTiming> timings;
  const SimulatedObject object = in_stage("synth", &timings, [&] { return test_object(c); });
  RunReport report = sample_and_report(c, object, models);
  report.timings.insert(report.timings.begin(), timings.begin(), timings.end());
  report.outputs["config"] = out / "config.txt";
  report.save_json(out / "report.json");
  return report;
}

RunReport run_experiment(const ExperimentConfig& c) {
  in_stage("config", nullptr, [&] { c.validate(); });
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  c.save(out / "config.txt");
  std::vector<StageTiming> timings;
  const SimulatedObject object = in_stage("synth", &timings, [&] { return test_object(c); });
  TrainedModels models = train_models(c, &timings);
  in_stage("save-models", &timings, [&] {
    nn::save_checkpoint(out / "detector.ckpt", models.classifier.detector().to_checkpoint());
    nn::save_checkpoint(out / "classifier.ckpt", models.classifier.classifier().to_checkpoint());
    models.erd.save(out / "erd_model.json");
  });
  RunReport report = sample_and_report(c, object, models);
  report.timings.insert(report.timings.begin(), timings.begin(), timings.end());
  report.outputs["config"] = out / "config.txt";
  report.outputs["detector"] = out / "detector.ckpt";
  report.outputs["classifier"] = out / "classifier.ckpt";
  report.outputs["erd_model"] = out / "erd_model.json";
  report.save_json(out / "report.json");
  return report;
}

}  // namespace eds::experiment
