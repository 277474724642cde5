// eds_slads: phantom synthesis, model training and dynamic sampling runs.
//
// Exit codes: 0 success, 2 configuration error, 3 training failure,
// 4 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eds/experiment/config.hpp"
#include "eds/experiment/experiment.hpp"
#include "eds/nn/checkpoint.hpp"
#include "eds/phantom/io.hpp"
#include "eds/training/training.hpp"

namespace fs = std::filesystem;
using namespace eds;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitRuntime = 4;

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--out", c.out, "output directory (default: $EDS_SLADS_OUT or ./eds_out)");
  cmd->add_option("--config", c.config, "experiment config file (key = value)");
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("EDS_SLADS_OUT"); env && *env) return env;
  return "eds_out";
}

// Only one worker is ever used; the variable is validated so typos surface.
void check_thread_env() {
  const char* env = std::getenv("EDS_SLADS_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("EDS_SLADS_THREADS must be a positive integer");
}

experiment::ExperimentConfig base_config(const Common& c) {
  experiment::ExperimentConfig cfg =
      c.config.empty() ? experiment::ExperimentConfig{} : experiment::ExperimentConfig::load(c.config);
  return cfg;
}

int cmd_synth(const Common& c, std::optional<int> size, std::optional<int> phases,
              std::optional<std::string> morphology, std::optional<double> noise_fraction,
              std::optional<std::size_t> bins) {
  auto cfg = base_config(c);
  cfg.seed = c.seed;
  if (cfg.train_seed == cfg.seed) cfg.train_seed = cfg.seed + 1;  // training side unused here
  if (size) cfg.size = *size;
  if (phases) cfg.phases = *phases;
  if (morphology) cfg.set("morphology", *morphology);
  if (noise_fraction) cfg.noise_fraction = *noise_fraction;
  if (bins) cfg.bins = *bins;
  cfg.validate();
  const fs::path out = out_dir(c);
  fs::create_directories(out);
  const SimulatedObject object = experiment::test_object(cfg);
  io::save_object(out / "object", object);
  io::write_library_csv(out / "library.csv", experiment::test_library(cfg));
  cfg.out_dir = out.string();
  cfg.save(out / "config.txt");
  std::printf("object %dx%d, %zu bins, %d phases -> %s\n", object.width(), object.height(),
              object.bins(), object.phases(), (out / "object").c_str());
  return 0;
}

int cmd_train_classifier(const Common& c, const std::string& library_path) {
  auto cfg = base_config(c);
  const PhaseLibrary library = io::read_library_csv(library_path);
  detector::NnrOptions nnr = cfg.nnr;
  nnr.noise = cfg.noise;
  nnr.ill_lambda = cfg.ill_lambda;
  nnr.seed = derive_seed(c.seed, stream::kNetInit, 1);
  classifier::CnnOptions cnn = cfg.cnn;
  cnn.noise = cfg.noise;
  cnn.seed = derive_seed(c.seed, stream::kNetInit, 2);
  detector::NnrTrainingReport nrep;
  classifier::CnnTrainingReport crep;
  const auto det = detector::train_nnr(library, nnr, &nrep);
  const auto cls = classifier::train_cnn(library, cnn, &crep);
  const fs::path out = out_dir(c);
  fs::create_directories(out);
  nn::save_checkpoint(out / "detector.ckpt", det.to_checkpoint());
  nn::save_checkpoint(out / "classifier.ckpt", cls.to_checkpoint());
  std::printf("detector: validation mse %.3g, threshold %.4g (valid p99 %.4g, ill p01 %.4g)\n",
              nrep.validation_mse, det.threshold(), nrep.valid_p99, nrep.ill_p01);
  std::printf("classifier: validation accuracy %.4f\n", crep.validation_accuracy);
  return 0;
}

int cmd_train_slads(const Common& c, const std::vector<std::string>& truths, std::optional<int> images) {
  auto cfg = base_config(c);
  cfg.train_seed = c.seed;
  if (images) cfg.train_images = *images;
  training::PairOptions pairs = cfg.pairs;
  pairs.recon = cfg.sampling.recon;
  std::vector<LabelImage> sources;
  if (truths.empty()) {
    sources = experiment::training_images(cfg);
  } else {
    for (const auto& t : truths) sources.push_back(io::read_label_pgm(t));
  }
  training::TrainingCorpus corpus;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    corpus.merge(training::generate_pairs(sources[i], pairs, derive_seed(c.seed, stream::kPairs, i)));
  }
  corpus.meta.seed = c.seed;
  for (const auto& w : corpus.meta.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const slads::ErdModel model = training::fit_theta(corpus, cfg.ridge_lambda);
  const fs::path out = out_dir(c);
  fs::create_directories(out);
  training::save_corpus(out / "corpus.bin", corpus);
  model.save(out / "erd_model.json");
  std::printf("%zu pairs from %zu images; theta =", corpus.pairs.size(), sources.size());
  for (double t : model.theta()) std::printf(" %.6g", t);
  std::printf("\n");
  return 0;
}

int cmd_run(const Common& c, const std::string& object_dir, const std::string& erd_path,
            const std::string& det_path, const std::string& cls_path, std::optional<double> stop) {
  auto cfg = base_config(c);
  cfg.seed = c.seed;
  if (cfg.train_seed == cfg.seed) cfg.train_seed = cfg.seed + 1;  // models come from files
  if (stop) cfg.sampling.stop_fraction = *stop;
  cfg.out_dir = out_dir(c).string();
  const SimulatedObject object = io::load_object(object_dir);
  cfg.phases = object.phases();
  cfg.validate();
  experiment::TrainedModels models{
      classifier::TwoTierClassifier(
          detector::NnrModel::from_checkpoint(nn::load_checkpoint(det_path)),
          classifier::CnnModel::from_checkpoint(nn::load_checkpoint(cls_path))),
      slads::ErdModel::load(erd_path)};
  fs::create_directories(cfg.out_dir);
  cfg.save(fs::path(cfg.out_dir) / "config.txt");
  const auto report = experiment::sample_and_report(cfg, object, models);
  std::printf("measured %zu pixels, TD %.6f, misclassification %.6f", report.measured, report.final_td,
              report.misclassification_rate);
  if (cfg.run_baseline) std::printf(", random-baseline TD %.6f", report.baseline_td);
  std::printf("\n");
  return 0;
}

int cmd_report(const Common& c, const std::string& run_dir) {
  if (!run_dir.empty()) {
    std::ifstream is(fs::path(run_dir) / "report.json");
    if (!is) throw InputError("no report.json in " + run_dir);
    const auto j = nlohmann::json::parse(is);
    std::printf("final TD %.6f  misclassification %.6f  measured %zu\n", j.at("final_td").get<double>(),
                j.at("misclassification_rate").get<double>(), j.at("measured").get<std::size_t>());
    if (!j.at("baseline_td").is_null()) std::printf("random baseline TD %.6f\n", j["baseline_td"].get<double>());
    if (j.contains("seconds")) {
      for (const auto& [stage, secs] : j["seconds"].items()) {
        std::printf("  %-18s %8.2f s\n", stage.c_str(), secs.get<double>());
      }
    }
    return 0;
  }
  auto cfg = base_config(c);
  cfg.seed = c.seed;
  cfg.out_dir = out_dir(c).string();
  const auto report = experiment::run_experiment(cfg);
  std::printf("TD %.6f at %.1f%% coverage; misclassification %.6f", report.final_td,
              100.0 * report.td_series.back().coverage, report.misclassification_rate);
  if (cfg.run_baseline) std::printf("; random-baseline TD %.6f", report.baseline_td);
  std::printf("\noutputs in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_classify(const Common& c, const std::string& spectra_path, const std::string& det_path,
                 const std::string& cls_path) {
  const classifier::TwoTierClassifier two_tier(
      detector::NnrModel::from_checkpoint(nn::load_checkpoint(det_path)),
      classifier::CnnModel::from_checkpoint(nn::load_checkpoint(cls_path)));
  const auto spectra = io::read_spectra_csv(spectra_path);
  const fs::path out = out_dir(c);
  fs::create_directories(out);
  std::ofstream os(out / "labels.csv");
  if (!os) throw InputError("cannot write labels.csv");
  os << "index,label,sigma2,max_prob\n";
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const auto r = two_tier.classify(spectra[i]);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g\n", i, static_cast<int>(r.label), r.variance_metric,
                  r.max_prob);
    os << buf;
  }
  std::printf("classified %zu spectra -> %s\n", spectra.size(), (out / "labels.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic sparse sampling for simulated EDS phase mapping"};
  app.require_subcommand(1);

  Common synth_c, tc_c, ts_c, run_c, rep_c, cls_c;

  auto* synth = app.add_subcommand("synth", "synthesize a test object and its phase library");
  add_common(synth, synth_c);
  std::optional<int> size, phases, images;
  std::optional<std::string> morphology;
  std::optional<double> noise_fraction, stop;
  std::optional<std::size_t> bins;
  synth->add_option("--size", size, "image edge length N");
  synth->add_option("--phases", phases, "number of phases L");
  synth->add_option("--morphology", morphology, "halfplane | lamellar | blobs");
  synth->add_option("--noise-fraction", noise_fraction, "fraction of ill-spectrum pixels");
  synth->add_option("--bins", bins, "spectrum length p");

  auto* train_cls = app.add_subcommand("train-classifier", "train the detector and classifier");
  add_common(train_cls, tc_c);
  std::string library;
  train_cls->add_option("--library", library, "library CSV")->required();

  auto* train_slads = app.add_subcommand("train-slads", "fit the ERD model on training phantoms");
  add_common(train_slads, ts_c);
  std::vector<std::string> truths;
  train_slads->add_option("--truth", truths, "training label PGMs (default: synthesize from --seed)");
  train_slads->add_option("--images", images, "number of synthesized training phantoms");

  auto* run = app.add_subcommand("run", "sample an object with trained models");
  add_common(run, run_c);
  std::string object_dir, erd_path, det_path, cls_path;
  run->add_option("--object", object_dir, "object directory from synth")->required();
  run->add_option("--erd-model", erd_path, "ERD model JSON")->required();
  run->add_option("--detector", det_path, "detector checkpoint")->required();
  run->add_option("--classifier", cls_path, "classifier checkpoint")->required();
  run->add_option("--stop-fraction", stop, "coverage at which to stop");

  auto* report = app.add_subcommand("report", "run a full experiment, or summarize a finished one");
  add_common(report, rep_c);
  std::string run_dir;
  report->add_option("--run", run_dir, "existing run directory to summarize");

  auto* classify = app.add_subcommand("classify", "two-tier classification of spectra from CSV");
  add_common(classify, cls_c);
  std::string spectra_path, cdet, ccls;
  classify->add_option("--spectra", spectra_path, "CSV, one spectrum per row")->required();
  classify->add_option("--detector", cdet, "detector checkpoint")->required();
  classify->add_option("--classifier", ccls, "classifier checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    check_thread_env();
    if (*synth) return cmd_synth(synth_c, size, phases, morphology, noise_fraction, bins);
    if (*train_cls) return cmd_train_classifier(tc_c, library);
    if (*train_slads) return cmd_train_slads(ts_c, truths, images);
    if (*run) return cmd_run(run_c, object_dir, erd_path, det_path, cls_path, stop);
    if (*report) return cmd_report(rep_c, run_dir);
    if (*classify) return cmd_classify(cls_c, spectra_path, cdet, ccls);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training failed: %s\n", e.what());
    return kExitTraining;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
