#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "mocotp/error.hpp"
#include "mocotp/experiment.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonOpts {
  std::string config_path;
  std::string output_dir;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  cmd->add_option("-c,--config", opts.config_path, "experiment config JSON")
      ->required(config_required);
  cmd->add_option("--output-dir", opts.output_dir, "override the config's output_dir");
  cmd->add_option("--seed", opts.seed, "override the config's seed");
}

mocotp::cli::ExperimentConfig load_config(const CommonOpts& opts) {
  auto cfg = mocotp::cli::load_experiment_config(opts.config_path);
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MoCo with temporal positives: pretraining, label-efficiency "
               "probing and detection evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string gt_file, pred_file, images_file, dataset_dir, report_file;

  auto* pretrain = app.add_subcommand("pretrain", "contrastive pretraining run");
  add_common(pretrain, opts);

  auto* probe = app.add_subcommand("probe", "label-efficiency probe suite");
  add_common(probe, opts);
  std::string checkpoint_path;
  probe->add_option("--checkpoint", checkpoint_path, "pretraining checkpoint")
      ->required();

  auto* det_eval = app.add_subcommand("det-eval", "detection metric report");
  add_common(det_eval, opts);
  det_eval->add_option("--ground-truth", gt_file, "ground-truth JSONL")->required();
  det_eval->add_option("--predictions", pred_file, "prediction JSONL")->required();

  auto* tile = app.add_subcommand("tile", "tile rasters and filter negatives");
  add_common(tile, opts);
  tile->add_option("--images", images_file, "image index JSONL")->required();
  tile->add_option("--ground-truth", gt_file, "ground-truth JSONL")->required();

  auto* matriochka =
      app.add_subcommand("matriochka", "nested class-preserving subsets");
  add_common(matriochka, opts);
  matriochka->add_option("--dataset-dir", dataset_dir,
                         "directory with images.jsonl and ground_truth.jsonl")
      ->required();

  auto* synth = app.add_subcommand("synth-gen", "render the synthetic dataset");
  add_common(synth, opts);

  auto* report = app.add_subcommand("report", "render a report JSON as text");
  report->add_option("file", report_file, "report JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pretrain->parsed()) {
      const auto artifacts = mocotp::cli::run_pretrain(load_config(opts));
      std::cout << "checkpoint: " << artifacts.checkpoint_path << "\n";
      std::cout << "train log:  " << artifacts.log_path << "\n";
      if (!artifacts.log.empty())
        std::cout << "final epoch loss: " << artifacts.log.back().mean_loss << "\n";
    } else if (probe->parsed()) {
      const auto artifacts =
          mocotp::cli::run_probe_suite(load_config(opts), checkpoint_path);
      std::cout << artifacts.table;
      std::cout << "report: " << artifacts.report_path << "\n";
    } else if (det_eval->parsed()) {
      const auto artifacts =
          mocotp::cli::run_det_eval(gt_file, pred_file, load_config(opts));
      std::cout << artifacts.table;
      std::cout << "report: " << artifacts.report_path << "\n";
    } else if (tile->parsed()) {
      const auto artifacts =
          mocotp::cli::run_tile(images_file, gt_file, load_config(opts));
      std::cout << "tiles: " << artifacts.tiles_path << "\n"
                << "positives: " << artifacts.positives
                << "  negatives kept: " << artifacts.negatives_kept << "/"
                << artifacts.negatives_total << "\n";
    } else if (matriochka->parsed()) {
      const auto artifacts =
          mocotp::cli::run_matriochka(dataset_dir, load_config(opts));
      std::cout << artifacts.table;
      for (const auto& w : artifacts.warnings)
        std::cout << "warning: " << w << "\n";
      std::cout << "summary: " << artifacts.summary_path << "\n";
    } else if (synth->parsed()) {
      const auto artifacts = mocotp::cli::run_synth_gen(load_config(opts));
      std::cout << "manifest: " << artifacts.manifest_path << " ("
                << artifacts.records << " records)\n";
    } else if (report->parsed()) {
      std::cout << mocotp::cli::render_report_file(report_file);
    }
  } catch (const mocotp::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const mocotp::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const mocotp::ContractError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
