#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eds/experiment/config.hpp"
#include "eds/experiment/experiment.hpp"
#include "eds/experiment/metrics.hpp"
#include "eds/phantom/io.hpp"

namespace fs = std::filesystem;
using namespace eds;
using namespace eds::experiment;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eds_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

// Small enough to run the whole pipeline in seconds.
ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.out_dir = out.string();
  c.size = 32;
  c.phases = 2;
  c.bins = 256;
  c.noise_fraction = 0.02;
  c.nnr.epochs = 6;
  c.cnn.epochs = 6;
  c.train_images = 2;
  c.pairs.samples_per_level = 150;
  c.sampling.stop_fraction = 0.3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EDS_SLADS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics

TEST(Metrics, TotalDistortionExamples) {
  const LabelImage a(4, 4, 1);
  EXPECT_EQ(metrics::total_distortion(a, a), 0.0);
  LabelImage comp(4, 4, 2);
  EXPECT_EQ(metrics::total_distortion(a, comp), 1.0);
  LabelImage big(128, 128, 1), off = big;
  for (int i = 0; i < 25; ++i) off.at(i * 5, i) = 2;
  EXPECT_EQ(metrics::total_distortion(big, off), 25.0 / 16384.0);
  EXPECT_THROW(metrics::total_distortion(a, LabelImage(4, 5, 1)), InputError);
}

TEST(Metrics, TotalDistortionIsPermutationInvariant) {
  // Applying one pixel permutation to both images keeps the mismatch count.
  Rng rng(1);
  LabelImage a(16, 16), b(16, 16);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<Label>(rng() % 3);
    b[i] = static_cast<Label>(rng() % 3);
  }
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabelImage pa(16, 16), pb(16, 16);
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  EXPECT_EQ(metrics::total_distortion(a, b), metrics::total_distortion(pa, pb));
}

TEST(Metrics, MisclassificationRate) {
  std::vector<Label> truth(5000, 1), got = truth;
  got[17] = 2;
  EXPECT_EQ(metrics::misclassification_rate(got, truth), 0.0002);
  EXPECT_EQ(metrics::misclassification_rate(truth, truth), 0.0);
  EXPECT_THROW(metrics::misclassification_rate({}, {}), InputError);
  EXPECT_THROW(metrics::misclassification_rate(std::vector<Label>(3, 1), std::vector<Label>(4, 1)), InputError);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, TextRoundTripIsLossless) {
  ExperimentConfig c;
  c.seed = 77;
  c.size = 96;
  c.morphology.kind = Morphology::kBlobs;
  c.morphology.feature_scale = 1.0 / 3.0;
  c.noise.mode = NoiseMode::kOffset;
  c.pairs.coverage_levels = {0.1, 0.25};
  c.run_baseline = false;
  c.cnn.learning_rate = 0.0123456789012345;
  const std::string text = c.to_text();
  const ExperimentConfig back = ExperimentConfig::parse(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.morphology.kind, Morphology::kBlobs);
  EXPECT_EQ(back.morphology.feature_scale, 1.0 / 3.0);
  EXPECT_EQ(back.cnn.learning_rate, c.cnn.learning_rate);
  EXPECT_EQ(back.pairs.coverage_levels, c.pairs.coverage_levels);
  EXPECT_FALSE(back.run_baseline);
  for (const auto& key : ExperimentConfig::keys()) {
    EXPECT_NE(text.find(key + " = "), std::string::npos) << key;
  }
}

TEST(Config, ParseRulesAndErrors) {
  const auto c = ExperimentConfig::parse("# comment\n\n  size = 64   # trailing\nphases=3\n");
  EXPECT_EQ(c.size, 64);
  EXPECT_EQ(c.phases, 3);
  EXPECT_THROW(ExperimentConfig::parse("no_such_key = 1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("size = big\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("size 64\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("config_version = 99\n"), ConfigError);
  EXPECT_NO_THROW(ExperimentConfig::parse("config_version = 1\n"));
  EXPECT_THROW(ExperimentConfig::parse("morphology = stripes\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/eds.cfg"), ConfigError);
}

TEST(Config, Validation) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.train_seed = c.seed;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.phases = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.noise_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sampling.stop_fraction = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// End to end

class SmallRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    out_ = scratch("run");
    config_ = small_config(out_);
    report_ = run_experiment(config_);
  }
  static inline fs::path out_;
  static inline ExperimentConfig config_;
  static inline RunReport report_;
};

TEST_F(SmallRun, WritesPanelsTraceAndReport) {
  for (const char* name : {"trace.csv", "baseline_trace.csv", "mask.pgm", "reconstruction.pgm", "truth.pgm",
                           "distortion.pgm", "report.json", "config.txt", "detector.ckpt", "classifier.ckpt",
                           "erd_model.json"}) {
    EXPECT_TRUE(fs::exists(out_ / name)) << name;
  }
  const auto j = nlohmann::json::parse(slurp(out_ / "report.json"));
  EXPECT_EQ(j.at("final_td").get<double>(), report_.final_td);
  EXPECT_EQ(j.at("measured").get<std::size_t>(), report_.measured);
  EXPECT_FALSE(j.at("baseline_td").is_null());
  EXPECT_TRUE(j.at("seconds").contains("train-classifier"));
  EXPECT_EQ(ExperimentConfig::load(out_ / "config.txt").to_text(), config_.to_text());
}

TEST_F(SmallRun, ReportedTdMatchesEmittedImages) {
  const LabelImage truth = io::read_label_pgm(out_ / "truth.pgm");
  const LabelImage recon = io::read_label_pgm(out_ / "reconstruction.pgm");
  EXPECT_EQ(truth, test_object(config_).truth());
  EXPECT_EQ(metrics::total_distortion(truth, recon), report_.final_td);
  const auto dist = io::read_gray_pgm(out_ / "distortion.pgm");
  std::size_t wrong = 0;
  for (auto px : dist.pixels) wrong += px == 255;
  EXPECT_EQ(static_cast<double>(wrong) / dist.pixels.size(), report_.final_td);
  const auto mask = io::read_gray_pgm(out_ / "mask.pgm");
  std::size_t measured = 0;
  for (auto px : mask.pixels) measured += px == 255;
  EXPECT_EQ(measured, report_.measured);
  EXPECT_EQ(measured, slads::coverage_count(config_.sampling.stop_fraction, 32, 32));
}

TEST_F(SmallRun, TraceIsConsistent) {
  std::istringstream trace(slurp(out_ / "trace.csv"));
  std::string line;
  std::getline(trace, line);
  EXPECT_EQ(line, "k,x,y,label,sigma2,td");
  std::size_t rows = 0;
  std::string last;
  while (std::getline(trace, line)) {
    ++rows;
    last = line;
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
  }
  EXPECT_EQ(rows, report_.measured);
  EXPECT_EQ(std::stod(last.substr(last.rfind(',') + 1)), report_.final_td);
  ASSERT_EQ(report_.td_series.size(), rows);
  for (std::size_t i = 1; i < report_.td_series.size(); ++i) {
    EXPECT_GT(report_.td_series[i].coverage, report_.td_series[i - 1].coverage);
  }
  EXPECT_EQ(report_.td_series.back().td, report_.final_td);
}

TEST_F(SmallRun, ReusedModelsReproduceTheRun) {
  ExperimentConfig again = config_;
  again.out_dir = scratch("rerun").string();
  const TrainedModels models{
      classifier::TwoTierClassifier(
          detector::NnrModel::from_checkpoint(nn::load_checkpoint(out_ / "detector.ckpt")),
          classifier::CnnModel::from_checkpoint(nn::load_checkpoint(out_ / "classifier.ckpt"))),
      slads::ErdModel::load(out_ / "erd_model.json")};
  const auto report = run_experiment(again, models);
  EXPECT_EQ(report.final_td, report_.final_td);
  for (const char* name : {"trace.csv", "reconstruction.pgm", "mask.pgm"}) {
    EXPECT_EQ(slurp(fs::path(again.out_dir) / name), slurp(out_ / name)) << name;
  }
}

TEST_F(SmallRun, TrainingOnTheTestTruthIsRejected) {
  const SimulatedObject object = test_object(config_);
  for (std::uint64_t source : {object.base_fingerprint(), fingerprint(object.truth())}) {
    slads::ErdModel erd = slads::ErdModel::load(out_ / "erd_model.json");
    erd.training_sources.push_back(source);
    EXPECT_THROW(require_disjoint(erd, object), ConfigError);
    ExperimentConfig c = config_;
    c.out_dir = scratch("leak").string();
    const TrainedModels models{
        classifier::TwoTierClassifier(
            detector::NnrModel::from_checkpoint(nn::load_checkpoint(out_ / "detector.ckpt")),
            classifier::CnnModel::from_checkpoint(nn::load_checkpoint(out_ / "classifier.ckpt"))),
        erd};
    EXPECT_THROW(run_experiment(c, models), ConfigError);
  }
  EXPECT_NO_THROW(require_disjoint(slads::ErdModel::load(out_ / "erd_model.json"), object));
}

TEST(Experiment, FailuresNameTheirStage) {
  ExperimentConfig c = small_config(scratch("stage"));
  c.cnn.epochs = 1;
  c.cnn.learning_rate = 1e-12;
  c.cnn.min_validation_accuracy = 1.0;
  c.phases = 4;
  try {
    run_experiment(c);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("[train-classifier]", 0), 0u) << e.what();
  }
  c = small_config(scratch("stage2"));
  c.train_seed = c.seed;
  try {
    run_experiment(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("[config]", 0), 0u) << e.what();
  }
}

TEST(Experiment, TrainingAndTestPhantomsAreDisjoint) {
  const ExperimentConfig c = small_config(scratch("disjoint"));
  const LabelImage truth = test_truth(c);
  for (const auto& img : training_images(c)) EXPECT_NE(fingerprint(img), fingerprint(truth));
  EXPECT_EQ(test_library(c).bins(), 256u);
  EXPECT_EQ(training_library(c).phases(), 2);
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("synth --size notanumber"), 2);
  {
    std::ofstream(dir / "bad.cfg") << "mystery = 1\n";
  }
  EXPECT_EQ(run_cli("report --config " + (dir / "bad.cfg").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("report --run " + (dir / "missing").string()), 4);
  EXPECT_EQ(run_cli("run --object " + (dir / "missing").string() +
                    " --erd-model a --detector b --classifier c --out " + (dir / "y").string()),
            4);

  // A single-label training image with no ridge gives a singular fit.
  io::write_label_pgm(dir / "flat.pgm", LabelImage(24, 24, 1), 2);
  {
    std::ofstream(dir / "ridge0.cfg") << "ridge_lambda = 0\nsamples_per_level = 50\n";
  }
  EXPECT_EQ(run_cli("train-slads --truth " + (dir / "flat.pgm").string() + " --config " +
                    (dir / "ridge0.cfg").string() + " --out " + (dir / "z").string()),
            3);
  setenv("EDS_SLADS_THREADS", "zero", 1);
  EXPECT_EQ(run_cli("report --run " + (dir / "missing").string()), 2);
  unsetenv("EDS_SLADS_THREADS");
}

TEST(Cli, SubcommandPipelineAndLeakCheck) {
  const fs::path dir = scratch("pipeline");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "small.cfg") << "size = 32\nbins = 256\nnoise_fraction = 0.02\nnnr_epochs = 6\n"
                                     << "cnn_epochs = 6\nsamples_per_level = 150\nstop_fraction = 0.3\n";
  }
  const std::string cfg = " --config " + (dir / "small.cfg").string();
  const std::string d = dir.string();
  ASSERT_EQ(run_cli("synth --seed 3" + cfg + " --out " + d + "/synth"), 0);
  ASSERT_TRUE(fs::exists(dir / "synth/object/truth.pgm"));
  ASSERT_EQ(run_cli("train-classifier --seed 40" + cfg + " --library " + d + "/synth/library.csv --out " + d +
                    "/models"),
            0);
  ASSERT_EQ(run_cli("train-slads --seed 50" + cfg + " --images 2 --out " + d + "/models"), 0);
  const std::string models = " --erd-model " + d + "/models/erd_model.json --detector " + d +
                             "/models/detector.ckpt --classifier " + d + "/models/classifier.ckpt";
  ASSERT_EQ(run_cli("run --seed 3" + cfg + " --object " + d + "/synth/object" + models + " --out " + d + "/run"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "run/report.json"));
  EXPECT_EQ(j.at("measured").get<std::size_t>(), slads::coverage_count(0.3, 32, 32));
  EXPECT_EQ(run_cli("report --run " + d + "/run"), 0);

  // Training the ERD on the object's own truth must be refused at run time.
  ASSERT_EQ(run_cli("train-slads --seed 50" + cfg + " --truth " + d + "/synth/object/truth.pgm --out " + d +
                    "/leak"),
            0);
  const std::string leaked = " --erd-model " + d + "/leak/erd_model.json --detector " + d +
                             "/models/detector.ckpt --classifier " + d + "/models/classifier.ckpt";
  EXPECT_EQ(run_cli("run --seed 3" + cfg + " --object " + d + "/synth/object" + leaked + " --out " + d + "/run2"), 2);
}
