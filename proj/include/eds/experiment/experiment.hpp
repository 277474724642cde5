#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "eds/classifier/classifier.hpp"
#include "eds/experiment/config.hpp"
#include "eds/phantom/simulated_object.hpp"
#include "eds/slads/sampler.hpp"

namespace eds::experiment {

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct CoveragePoint {
  double coverage = 0.0;
  double td = 0.0;
};

struct RunReport {
  std::vector<CoveragePoint> td_series;  // one point per measurement
  double final_td = 0.0;
  double misclassification_rate = 0.0;  // over measured pixels
  std::size_t measured = 0;
  double baseline_td = std::numeric_limits<double>::quiet_NaN();  // NaN when not run
  std::vector<StageTiming> timings;
  std::map<std::string, std::filesystem::path> outputs;

  void save_json(const std::filesystem::path& path) const;
};

struct TrainedModels {
  classifier::TwoTierClassifier classifier;
  slads::ErdModel erd;
};

// Deterministic inputs derived from the config.
PhaseLibrary training_library(const ExperimentConfig& config);
PhaseLibrary test_library(const ExperimentConfig& config);
LabelImage test_truth(const ExperimentConfig& config);
SimulatedObject test_object(const ExperimentConfig& config);
std::vector<LabelImage> training_images(const ExperimentConfig& config);

classifier::TwoTierClassifier train_two_tier(const ExperimentConfig& config);
slads::ErdModel train_erd(const ExperimentConfig& config);
TrainedModels train_models(const ExperimentConfig& config, std::vector<StageTiming>* timings = nullptr);

// Throws ConfigError when the object's truth (before or after ill-pixel
// injection) was among the ERD training images.
void require_disjoint(const slads::ErdModel& erd, const SimulatedObject& object);

// Full pipeline: synth -> train detector/classifier -> train ERD -> sample
// the test object -> write panels, traces and report.json under out_dir.
// Failures carry the stage name; files written so far are kept.
RunReport run_experiment(const ExperimentConfig& config);
// Same, with models trained elsewhere (they are not re-saved).
RunReport run_experiment(const ExperimentConfig& config, const TrainedModels& models);

// Samples `object` with `models` and writes outputs into config.out_dir.
RunReport sample_and_report(const ExperimentConfig& config, const SimulatedObject& object,
                            const TrainedModels& models);

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const slads::TraceRow& row);

// Mask (255 = measured), distortion (255 = wrong) panels.
void write_mask_pgm(const std::filesystem::path& path, const slads::MeasurementSet& m);
void write_distortion_pgm(const std::filesystem::path& path, const LabelImage& truth,
                          const LabelImage& recon);

}  // namespace eds::experiment
