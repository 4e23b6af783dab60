#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mocotp/augment.hpp"
#include "mocotp/contrast.hpp"
#include "mocotp/data.hpp"
#include "mocotp/det.hpp"
#include "mocotp/probe.hpp"

namespace mocotp::cli {

// One self-describing config file per experiment. All randomness flows from
// `seed` through named substreams, so the individual commands can be re-run
// independently and still reproduce.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  std::string manifest_path;  // empty when the dataset is synthetic
  std::string images_root;
  std::optional<data::SyntheticSpec> synthetic;

  moco::ContrastiveConfig contrastive;
  moco::EncoderConfig encoder;
  aug::AugmentationConfig augmentation;

  probe::ProbeConfig probe_cfg;
  std::vector<double> probe_fractions{0.01, 0.10, 1.00};
  int probe_replicates = 3;
  double val_fraction = 0.25;

  det::TileSpec tile;
  double negative_keep_ratio = 0.2;
  std::vector<double> target_fractions{0.5, 0.1};
  int matriochka_seeds = 3;
  double iou_threshold = 0.0;
  std::vector<double> score_thresholds = det::default_score_thresholds();
  std::vector<std::string> det_classes;  // optional fixed vocabulary
};

ExperimentConfig load_experiment_config(const std::string& path);
void validate(const ExperimentConfig& cfg);

// Loads the manifest named by the config, or generates the synthetic
// dataset in memory.
struct LoadedDataset {
  data::Manifest manifest;
  data::ImageStore store;
};
LoadedDataset load_dataset(const ExperimentConfig& cfg);

struct PretrainArtifacts {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<moco::TrainLogEntry> log;
};
PretrainArtifacts run_pretrain(const ExperimentConfig& cfg);

struct ProbeSuiteArtifacts {
  std::string report_path;
  probe::SuiteReport report;
  std::string table;
};
ProbeSuiteArtifacts run_probe_suite(const ExperimentConfig& cfg,
                                    const std::string& checkpoint_path);

struct DetEvalArtifacts {
  std::string report_path;
  det::MetricReport report;
  std::string table;
};
DetEvalArtifacts run_det_eval(const std::string& gt_file,
                              const std::string& pred_file,
                              const ExperimentConfig& cfg);

struct TileArtifacts {
  std::string tiles_path;
  std::size_t positives = 0;
  std::size_t negatives_total = 0;
  std::size_t negatives_kept = 0;
};
TileArtifacts run_tile(const std::string& images_file, const std::string& gt_file,
                       const ExperimentConfig& cfg);

struct MatriochkaArtifacts {
  std::string summary_path;
  std::string table;
  std::vector<std::string> warnings;
  std::vector<std::string> subset_dirs;
};
MatriochkaArtifacts run_matriochka(const std::string& dataset_dir,
                                   const ExperimentConfig& cfg);

struct SynthArtifacts {
  std::string dataset_dir;
  std::string manifest_path;
  std::size_t records = 0;
};
SynthArtifacts run_synth_gen(const ExperimentConfig& cfg);

std::string render_probe_table(const probe::SuiteReport& report);
std::string render_det_table(const det::MetricReport& report);
// Renders a previously written report JSON (probe, detection or matriochka).
std::string render_report_file(const std::string& report_json_path);

}  // namespace mocotp::cli
