#include "mocotp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mocotp/error.hpp"
#include "mocotp/serialize.hpp"

namespace mocotp::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("unparseable JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

std::string fraction_key(double fraction) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction);
  return buf;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  const json j = read_json_file(path);
  ExperimentConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);

  if (j.contains("dataset")) {
    const auto& ds = j.at("dataset");
    cfg.manifest_path = ds.value("manifest", std::string{});
    cfg.images_root = ds.value("images_root", std::string{});
    if (ds.contains("synthetic"))
      cfg.synthetic = ds.at("synthetic").get<data::SyntheticSpec>();
  }
  if (j.contains("pretrain")) {
    const auto& pt = j.at("pretrain");
    if (pt.contains("contrastive"))
      cfg.contrastive = pt.at("contrastive").get<moco::ContrastiveConfig>();
    if (pt.contains("encoder"))
      cfg.encoder = pt.at("encoder").get<moco::EncoderConfig>();
    if (pt.contains("augmentation"))
      cfg.augmentation = pt.at("augmentation").get<aug::AugmentationConfig>();
  }
  if (j.contains("probe")) {
    const auto& pr = j.at("probe");
    if (pr.contains("config")) cfg.probe_cfg = pr.at("config").get<probe::ProbeConfig>();
    cfg.probe_fractions = pr.value("fractions", cfg.probe_fractions);
    cfg.probe_replicates = pr.value("replicates", cfg.probe_replicates);
    cfg.val_fraction = pr.value("val_fraction", cfg.val_fraction);
  }
  if (j.contains("detkit")) {
    const auto& dk = j.at("detkit");
    cfg.tile.tile_size = dk.value("tile_size", cfg.tile.tile_size);
    cfg.tile.overlap = dk.value("overlap", cfg.tile.overlap);
    cfg.negative_keep_ratio = dk.value("negative_keep_ratio", cfg.negative_keep_ratio);
    cfg.target_fractions = dk.value("target_fractions", cfg.target_fractions);
    cfg.matriochka_seeds = dk.value("matriochka_seeds", cfg.matriochka_seeds);
    cfg.iou_threshold = dk.value("iou_threshold", cfg.iou_threshold);
    cfg.det_classes = dk.value("classes", cfg.det_classes);
    if (dk.contains("score_thresholds")) {
      const auto& st = dk.at("score_thresholds");
      if (st.is_array()) {
        cfg.score_thresholds = st.get<std::vector<double>>();
      } else {
        const double start = st.value("start", 0.15);
        const double stop = st.value("stop", 0.90);
        const double step = st.value("step", 0.05);
        if (step <= 0.0) throw ValidationError("score_thresholds.step must be positive");
        cfg.score_thresholds.clear();
        for (double t = start; t <= stop + 1e-9; t += step)
          cfg.score_thresholds.push_back(t);
      }
    }
  }
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.manifest_path.empty() && !cfg.synthetic)
    throw ValidationError("config: dataset needs either a manifest path or a synthetic spec");
  if (cfg.synthetic) data::validate(*cfg.synthetic);
  moco::validate(cfg.contrastive);
  moco::validate(cfg.encoder);
  aug::validate(cfg.augmentation);
  probe::validate(cfg.probe_cfg);
  det::validate(cfg.tile);
  if (cfg.output_dir.empty()) throw ValidationError("config: output_dir is empty");
  if (cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
    throw ValidationError("config: val_fraction must be in (0,1)");
  if (cfg.probe_replicates < 1)
    throw ValidationError("config: probe replicates must be positive");
  for (double f : cfg.probe_fractions)
    if (f <= 0.0 || f > 1.0)
      throw ValidationError("config: probe fractions must be in (0,1]");
  if (cfg.negative_keep_ratio < 0.0 || cfg.negative_keep_ratio > 1.0)
    throw ValidationError("config: negative_keep_ratio must be in [0,1]");
  if (cfg.score_thresholds.empty())
    throw ValidationError("config: score_thresholds must not be empty");
  if (cfg.iou_threshold < 0.0)
    throw ValidationError("config: iou_threshold must be >= 0");
}

LoadedDataset load_dataset(const ExperimentConfig& cfg) {
  if (!cfg.manifest_path.empty()) {
    if (!fs::exists(cfg.manifest_path))
      throw ValidationError("manifest not found: " + cfg.manifest_path);
    data::Manifest manifest = data::load_manifest(cfg.manifest_path);
    std::string root = cfg.images_root;
    if (root.empty()) root = fs::path(cfg.manifest_path).parent_path().string();
    return {std::move(manifest), data::ImageStore(root)};
  }
  data::SyntheticDataset ds = data::generate_synthetic_dataset(*cfg.synthetic);
  data::ImageStore store = data::ImageStore::from_synthetic(ds);
  return {std::move(ds.manifest), std::move(store)};
}

PretrainArtifacts run_pretrain(const ExperimentConfig& cfg) {
  validate(cfg);
  LoadedDataset ds = load_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  const std::uint64_t seed = Rng(cfg.seed).substream("pretrain").root_seed();
  moco::PretrainResult result = moco::pretrain(ds.manifest, ds.store, cfg.contrastive,
                                               cfg.encoder, cfg.augmentation, seed);
  PretrainArtifacts artifacts;
  artifacts.checkpoint_path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();
  artifacts.log_path = (fs::path(cfg.output_dir) / "train_log.jsonl").string();
  moco::checkpoint_save(artifacts.checkpoint_path, result.state, cfg.contrastive,
                        cfg.augmentation);
  moco::save_train_log(result.log, artifacts.log_path);
  artifacts.log = std::move(result.log);
  return artifacts;
}

ProbeSuiteArtifacts run_probe_suite(const ExperimentConfig& cfg,
                                    const std::string& checkpoint_path) {
  validate(cfg);
  moco::Checkpoint ckpt = moco::checkpoint_load(checkpoint_path);
  LoadedDataset ds = load_dataset(cfg);
  if (ds.manifest.class_vocabulary.empty())
    throw ValidationError("probe: manifest has no class vocabulary");
  if (ckpt.encoder_config.input_size != ckpt.aug_config.output_size)
    throw ValidationError("probe: checkpoint encoder/augmentation sizes disagree");

  Rng root(cfg.seed);
  Rng split_rng = root.substream("probe_split");
  auto [train, val] = data::split_by_groups(ds.manifest, cfg.val_fraction, split_rng);

  probe::ProbeConfig base = cfg.probe_cfg;
  probe::SuiteReport report = probe::run_label_efficiency_suite(
      ckpt.state.query, train, val, ds.store, ckpt.aug_config, cfg.probe_fractions,
      cfg.probe_replicates, base, root.substream("probe").root_seed());

  json j;
  for (const auto& cell : report.cells) {
    json c = {{"mean_f1", cell.mean_f1},
              {"sd_f1", cell.sd_f1},
              {"per_replicate", cell.per_replicate}};
    j["fractions"][fraction_key(cell.fraction)][probe::to_string(cell.mode)] =
        std::move(c);
  }
  fs::create_directories(cfg.output_dir);
  ProbeSuiteArtifacts artifacts;
  artifacts.report_path = (fs::path(cfg.output_dir) / "probe_report.json").string();
  write_json_file(j, artifacts.report_path);
  artifacts.table = render_probe_table(report);
  artifacts.report = std::move(report);
  return artifacts;
}

DetEvalArtifacts run_det_eval(const std::string& gt_file,
                              const std::string& pred_file,
                              const ExperimentConfig& cfg) {
  auto [gts, vocab] = det::load_ground_truth(gt_file, cfg.det_classes);
  const auto preds = det::load_predictions(pred_file, vocab);
  det::MetricReport report = det::evaluate_detections(
      preds, gts, vocab, cfg.score_thresholds, cfg.iou_threshold);

  json j;
  j["level1"]["f1"] = report.level1_f1;
  j["level1"]["f1_at_fixed_threshold"] = report.level1_f1_fixed;
  j["level1"]["ap"] = report.level1_ap;
  for (const auto& p : report.level1_curve)
    j["level1"]["pr_curve"].push_back(
        {{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  j["level2"]["map"] = report.level2_map;
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    if (report.per_class_ap[c] < 0.0)
      j["level2"]["per_class"][report.class_names[c]] = nullptr;
    else
      j["level2"]["per_class"][report.class_names[c]] = report.per_class_ap[c];
  }

  fs::create_directories(cfg.output_dir);
  DetEvalArtifacts artifacts;
  artifacts.report_path = (fs::path(cfg.output_dir) / "det_report.json").string();
  write_json_file(j, artifacts.report_path);
  artifacts.table = render_det_table(report);
  artifacts.report = std::move(report);
  return artifacts;
}

TileArtifacts run_tile(const std::string& images_file, const std::string& gt_file,
                       const ExperimentConfig& cfg) {
  const det::DetectionDataset dataset =
      det::load_detection_dataset(images_file, gt_file, cfg.det_classes);
  det::TileClassification tiles = det::classify_tiles(dataset, cfg.tile);
  Rng rng = Rng(cfg.seed).substream("tiles");
  const auto kept =
      det::subsample_negative_tiles(tiles.negatives, cfg.negative_keep_ratio, rng);

  fs::create_directories(cfg.output_dir);
  TileArtifacts artifacts;
  artifacts.tiles_path = (fs::path(cfg.output_dir) / "tiles.jsonl").string();
  artifacts.positives = tiles.positives.size();
  artifacts.negatives_total = tiles.negatives.size();
  artifacts.negatives_kept = kept.size();

  std::ofstream out(artifacts.tiles_path);
  if (!out) throw IoError("cannot write " + artifacts.tiles_path);
  const auto dump_tile = [&](const det::Tile& t, bool positive) {
    json j = {{"image_id", t.image_id}, {"x0", t.window.x0}, {"y0", t.window.y0},
              {"x1", t.window.x1}, {"y1", t.window.y1}, {"positive", positive}};
    j["objects"] = json::array();
    for (const auto& obj : t.objects)
      j["objects"].push_back({{"xmin", obj.box.xmin}, {"ymin", obj.box.ymin},
                              {"xmax", obj.box.xmax}, {"ymax", obj.box.ymax},
                              {"class", dataset.class_vocabulary[
                                  static_cast<std::size_t>(obj.class_id)]}});
    out << j.dump() << "\n";
  };
  for (const auto& t : tiles.positives) dump_tile(t, true);
  for (const auto& t : kept) dump_tile(t, false);
  return artifacts;
}

MatriochkaArtifacts run_matriochka(const std::string& dataset_dir,
                                   const ExperimentConfig& cfg) {
  const fs::path dir(dataset_dir);
  const det::DetectionDataset dataset = det::load_detection_dataset(
      (dir / "images.jsonl").string(), (dir / "ground_truth.jsonl").string(),
      cfg.det_classes);

  fs::create_directories(cfg.output_dir);
  MatriochkaArtifacts artifacts;
  json summary;
  std::ostringstream table;
  table << "subset      seed  images  observables";
  for (const auto& name : dataset.class_vocabulary) table << "  " << name;
  table << "\n";

  for (int seed_idx = 0; seed_idx < cfg.matriochka_seeds; ++seed_idx) {
    Rng rng = Rng(cfg.seed).substream("matriochka",
                                      static_cast<std::uint64_t>(seed_idx));
    det::MatriochkaResult result =
        det::matriochka_sample(dataset, cfg.target_fractions, rng);
    for (const auto& w : result.warnings)
      artifacts.warnings.push_back("seed " + std::to_string(seed_idx) + ": " + w);

    for (std::size_t fi = 0; fi < cfg.target_fractions.size(); ++fi) {
      const double fraction = cfg.target_fractions[fi];
      const auto& ids = result.subsets[fi];
      const std::set<std::string> id_set(ids.begin(), ids.end());

      const fs::path subset_dir = fs::path(cfg.output_dir) /
                                  ("matriochka_seed" + std::to_string(seed_idx)) /
                                  ("frac_" + fraction_key(fraction));
      fs::create_directories(subset_dir);
      std::ofstream images_out((subset_dir / "images.jsonl").string());
      for (const auto& info : dataset.images)
        if (id_set.count(info.image_id))
          images_out << json{{"image_id", info.image_id},
                             {"width", info.width},
                             {"height", info.height}}.dump()
                     << "\n";
      std::ofstream gt_out((subset_dir / "ground_truth.jsonl").string());
      std::vector<long> per_class(dataset.class_vocabulary.size(), 0);
      long observables = 0;
      for (const auto& obj : dataset.objects)
        if (id_set.count(obj.image_id)) {
          gt_out << json{{"image_id", obj.image_id}, {"xmin", obj.box.xmin},
                         {"ymin", obj.box.ymin}, {"xmax", obj.box.xmax},
                         {"ymax", obj.box.ymax},
                         {"class", dataset.class_vocabulary[
                             static_cast<std::size_t>(obj.class_id)]}}.dump()
                 << "\n";
          ++per_class[static_cast<std::size_t>(obj.class_id)];
          ++observables;
        }
      artifacts.subset_dirs.push_back(subset_dir.string());

      json entry = {{"seed", seed_idx}, {"fraction", fraction},
                    {"images", ids.size()}, {"observables", observables}};
      for (std::size_t c = 0; c < dataset.class_vocabulary.size(); ++c)
        entry["per_class"][dataset.class_vocabulary[c]] = per_class[c];
      summary["subsets"].push_back(entry);

      table << fraction_key(fraction) << "        " << seed_idx << "     "
            << ids.size() << "      " << observables;
      for (long n : per_class) table << "  " << n;
      table << "\n";
    }
  }
  summary["warnings"] = artifacts.warnings;
  artifacts.summary_path = (fs::path(cfg.output_dir) / "matriochka_summary.json").string();
  write_json_file(summary, artifacts.summary_path);
  artifacts.table = table.str();
  return artifacts;
}

SynthArtifacts run_synth_gen(const ExperimentConfig& cfg) {
  if (!cfg.synthetic)
    throw ValidationError("synth-gen: config has no dataset.synthetic section");
  const data::SyntheticDataset ds = data::generate_synthetic_dataset(*cfg.synthetic);
  fs::create_directories(cfg.output_dir);
  data::save_synthetic_dataset(ds, cfg.output_dir);
  SynthArtifacts artifacts;
  artifacts.dataset_dir = cfg.output_dir;
  artifacts.manifest_path = (fs::path(cfg.output_dir) / "manifest.jsonl").string();
  artifacts.records = ds.manifest.record_count();
  return artifacts;
}

std::string render_probe_table(const probe::SuiteReport& report) {
  std::ostringstream out;
  out << "label fraction   mode      macro-F1 %  (mean (sd) over replicates)\n";
  for (const auto& cell : report.cells) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %-9s %6.2f (%.2f)   n=%zu\n",
                  fraction_key(cell.fraction).c_str(),
                  probe::to_string(cell.mode).c_str(), 100.0 * cell.mean_f1,
                  100.0 * cell.sd_f1, cell.per_replicate.size());
    out << line;
  }
  return out.str();
}

std::string render_det_table(const det::MetricReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line),
                "level-1: F1 %.4f (fixed-threshold %.4f)  AP %.4f\n",
                report.level1_f1, report.level1_f1_fixed, report.level1_ap);
  out << line;
  std::snprintf(line, sizeof(line), "level-2: mAP %.4f\n", report.level2_map);
  out << line;
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    if (report.per_class_ap[c] < 0.0)
      std::snprintf(line, sizeof(line), "  %-24s (no data)\n",
                    report.class_names[c].c_str());
    else
      std::snprintf(line, sizeof(line), "  %-24s AP %.4f\n",
                    report.class_names[c].c_str(), report.per_class_ap[c]);
    out << line;
  }
  return out.str();
}

std::string render_report_file(const std::string& report_json_path) {
  const json j = read_json_file(report_json_path);
  std::ostringstream out;
  if (j.contains("fractions")) {
    out << "label fraction   mode      macro-F1 %  (mean (sd))\n";
    for (const auto& [frac, modes] : j.at("fractions").items())
      for (const auto& [mode, cell] : modes.items()) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %-9s %6.2f (%.2f)\n", frac.c_str(),
                      mode.c_str(), 100.0 * cell.at("mean_f1").get<double>(),
                      100.0 * cell.at("sd_f1").get<double>());
        out << line;
      }
    return out.str();
  }
  if (j.contains("level1")) {
    char line[160];
    std::snprintf(line, sizeof(line),
                  "level-1: F1 %.4f (fixed-threshold %.4f)  AP %.4f\n",
                  j.at("level1").at("f1").get<double>(),
                  j.at("level1").at("f1_at_fixed_threshold").get<double>(),
                  j.at("level1").at("ap").get<double>());
    out << line;
    std::snprintf(line, sizeof(line), "level-2: mAP %.4f\n",
                  j.at("level2").at("map").get<double>());
    out << line;
    if (j.at("level2").contains("per_class"))
      for (const auto& [name, ap] : j.at("level2").at("per_class").items()) {
        if (ap.is_null())
          std::snprintf(line, sizeof(line), "  %-24s (no data)\n", name.c_str());
        else
          std::snprintf(line, sizeof(line), "  %-24s AP %.4f\n", name.c_str(),
                        ap.get<double>());
        out << line;
      }
    return out.str();
  }
  if (j.contains("subsets")) {
    out << "subset  seed  images  observables\n";
    for (const auto& entry : j.at("subsets")) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-7.2f %-5d %-7zu %ld\n",
                    entry.at("fraction").get<double>(), entry.at("seed").get<int>(),
                    entry.at("images").get<std::size_t>(),
                    entry.at("observables").get<long>());
      out << line;
    }
    if (j.contains("warnings"))
      for (const auto& w : j.at("warnings")) out << "warning: " << w.get<std::string>() << "\n";
    return out.str();
  }
  throw ValidationError("unrecognized report format in " + report_json_path);
}

}  // namespace mocotp::cli
