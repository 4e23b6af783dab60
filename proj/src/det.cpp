#include "mocotp/det.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mocotp/error.hpp"

namespace mocotp::det {

using json = nlohmann::json;

void validate(const BBox& box) {
  if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin))
    throw ValidationError("degenerate box: max must exceed min in both axes");
}

void validate(const TileSpec& spec) {
  if (spec.tile_size < 1 || spec.overlap < 0 || spec.overlap >= spec.tile_size)
    throw ContractError("TileSpec: need 0 <= overlap < tile_size");
}

namespace {

std::vector<int> axis_origins(int extent, const TileSpec& spec) {
  if (extent <= spec.tile_size) return {0};
  std::vector<int> origins;
  for (int x = 0; x + spec.tile_size <= extent; x += spec.stride())
    origins.push_back(x);
  if (origins.back() + spec.tile_size < extent)
    origins.push_back(extent - spec.tile_size);
  return origins;
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

}  // namespace

std::vector<TileWindow> tile_image(int width, int height, const TileSpec& spec) {
  if (width < 1 || height < 1) throw ContractError("tile_image: empty image");
  validate(spec);
  const auto xs = axis_origins(width, spec);
  const auto ys = axis_origins(height, spec);
  std::vector<TileWindow> windows;
  windows.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs)
      windows.push_back({x, y, std::min(x + spec.tile_size, width),
                         std::min(y + spec.tile_size, height)});
  return windows;
}

TileClassification classify_tiles(const DetectionDataset& dataset,
                                  const TileSpec& spec) {
  std::unordered_map<std::string, std::vector<const GroundTruthObject*>> by_image;
  for (const auto& obj : dataset.objects) by_image[obj.image_id].push_back(&obj);

  TileClassification out;
  for (const auto& info : dataset.images) {
    const auto windows = tile_image(info.width, info.height, spec);
    const auto it = by_image.find(info.image_id);
    const std::vector<const GroundTruthObject*>* objs =
        it != by_image.end() ? &it->second : nullptr;
    for (const auto& w : windows) {
      const BBox window_box{static_cast<double>(w.x0), static_cast<double>(w.y0),
                            static_cast<double>(w.x1), static_cast<double>(w.y1)};
      Tile tile{info.image_id, w, {}};
      bool positive = false;
      if (objs) {
        for (const auto* obj : *objs) {
          const double inter = intersection_area(obj->box, window_box);
          if (inter <= 0.0) continue;
          positive = true;
          if (inter < 0.1 * obj->box.area()) continue;  // sliver, not assigned
          GroundTruthObject local = *obj;
          local.box.xmin = std::max(obj->box.xmin, window_box.xmin) - w.x0;
          local.box.ymin = std::max(obj->box.ymin, window_box.ymin) - w.y0;
          local.box.xmax = std::min(obj->box.xmax, window_box.xmax) - w.x0;
          local.box.ymax = std::min(obj->box.ymax, window_box.ymax) - w.y0;
          tile.objects.push_back(std::move(local));
        }
      }
      (positive ? out.positives : out.negatives).push_back(std::move(tile));
    }
  }
  return out;
}

std::vector<Tile> subsample_negative_tiles(const std::vector<Tile>& negatives,
                                           double keep_ratio, Rng& rng) {
  if (keep_ratio < 0.0 || keep_ratio > 1.0)
    throw ContractError("subsample_negative_tiles: keep_ratio must be in [0,1]");
  const auto n_keep = static_cast<std::size_t>(
      std::llround(keep_ratio * static_cast<double>(negatives.size())));
  std::vector<std::size_t> order(negatives.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_below(i)]);
  std::vector<Tile> kept;
  kept.reserve(n_keep);
  for (std::size_t i = 0; i < n_keep; ++i) kept.push_back(negatives[order[i]]);
  return kept;
}

namespace {

struct ImageCounts {
  std::string image_id;
  std::vector<long> per_class;
  long total = 0;
};

double l1_divergence(const std::vector<long>& counts, long total,
                     const std::vector<double>& target_props) {
  if (total == 0) return 2.0;  // worst case
  double d = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    d += std::abs(static_cast<double>(counts[c]) / static_cast<double>(total) -
                  target_props[c]);
  return d;
}

}  // namespace

MatriochkaResult matriochka_sample(const DetectionDataset& dataset,
                                   const std::vector<double>& target_fractions,
                                   Rng& rng, double proportion_tolerance) {
  if (target_fractions.empty())
    throw ContractError("matriochka_sample: no target fractions");
  for (std::size_t i = 0; i < target_fractions.size(); ++i) {
    if (!(target_fractions[i] > 0.0) || target_fractions[i] > 1.0)
      throw ContractError("matriochka_sample: fractions must be in (0,1]");
    if (i > 0 && !(target_fractions[i] < target_fractions[i - 1]))
      throw ContractError("matriochka_sample: fractions must be strictly descending");
  }
  const int num_classes = static_cast<int>(dataset.class_vocabulary.size());

  std::unordered_map<std::string, std::size_t> image_index;
  std::vector<ImageCounts> images;
  images.reserve(dataset.images.size());
  for (const auto& info : dataset.images) {
    image_index.emplace(info.image_id, images.size());
    images.push_back({info.image_id,
                      std::vector<long>(static_cast<std::size_t>(num_classes), 0), 0});
  }
  long grand_total = 0;
  std::vector<long> full_counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& obj : dataset.objects) {
    const auto it = image_index.find(obj.image_id);
    if (it == image_index.end())
      throw ValidationError("object references unknown image " + obj.image_id);
    ++images[it->second].per_class[static_cast<std::size_t>(obj.class_id)];
    ++images[it->second].total;
    ++full_counts[static_cast<std::size_t>(obj.class_id)];
    ++grand_total;
  }
  std::vector<double> full_props(static_cast<std::size_t>(num_classes), 0.0);
  if (grand_total > 0)
    for (int c = 0; c < num_classes; ++c)
      full_props[static_cast<std::size_t>(c)] =
          static_cast<double>(full_counts[static_cast<std::size_t>(c)]) /
          static_cast<double>(grand_total);

  // Build smallest-first, then grow.
  std::vector<double> ascending(target_fractions.rbegin(), target_fractions.rend());
  std::vector<bool> selected(images.size(), false);
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  long total = 0;

  MatriochkaResult result;
  std::vector<std::vector<std::string>> subsets_ascending;
  for (double fraction : ascending) {
    if (fraction >= 1.0) {
      for (std::size_t i = 0; i < images.size(); ++i)
        if (!selected[i]) {
          selected[i] = true;
          total += images[i].total;
        }
    } else {
      const double target = fraction * static_cast<double>(grand_total);
      while (static_cast<double>(total) < target) {
        double best_score = 0.0;
        std::vector<std::size_t> best;
        std::vector<long> trial(static_cast<std::size_t>(num_classes));
        for (std::size_t i = 0; i < images.size(); ++i) {
          if (selected[i] || images[i].total == 0) continue;
          for (int c = 0; c < num_classes; ++c)
            trial[static_cast<std::size_t>(c)] =
                counts[static_cast<std::size_t>(c)] +
                images[i].per_class[static_cast<std::size_t>(c)];
          const long trial_total = total + images[i].total;
          const double overshoot =
              std::max(0.0, (static_cast<double>(trial_total) - target) / target);
          const double score = l1_divergence(trial, trial_total, full_props) + overshoot;
          if (best.empty() || score < best_score - 1e-12) {
            best_score = score;
            best.assign(1, i);
          } else if (score <= best_score + 1e-12) {
            best.push_back(i);
          }
        }
        if (best.empty()) {
          result.warnings.push_back("fraction " + std::to_string(fraction) +
                                    ": ran out of images before reaching the target");
          break;
        }
        const std::size_t pick = best[rng.uniform_below(best.size())];
        // Stop short if adding would land farther from the target than we are.
        const double after = static_cast<double>(total + images[pick].total);
        if (total > 0 && std::abs(after - target) > std::abs(static_cast<double>(total) - target))
          break;
        selected[pick] = true;
        total += images[pick].total;
        for (int c = 0; c < num_classes; ++c)
          counts[static_cast<std::size_t>(c)] +=
              images[pick].per_class[static_cast<std::size_t>(c)];
      }
      if (grand_total > 0 &&
          std::abs(static_cast<double>(total) - target) > 0.10 * target)
        result.warnings.push_back("fraction " + std::to_string(fraction) +
                                  ": observable count " + std::to_string(total) +
                                  " misses the +-10% band around " +
                                  std::to_string(target));
      for (int c = 0; c < num_classes; ++c) {
        if (full_counts[static_cast<std::size_t>(c)] == 0) continue;
        const double prop =
            total > 0 ? static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                            static_cast<double>(total)
                      : 0.0;
        if (std::abs(prop - full_props[static_cast<std::size_t>(c)]) >
            proportion_tolerance)
          result.warnings.push_back(
              "fraction " + std::to_string(fraction) + ": class '" +
              dataset.class_vocabulary[static_cast<std::size_t>(c)] +
              "' proportion deviates beyond tolerance");
      }
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < images.size(); ++i)
      if (selected[i]) ids.push_back(images[i].image_id);
    std::sort(ids.begin(), ids.end());
    subsets_ascending.push_back(std::move(ids));
  }

  result.subsets.assign(subsets_ascending.rbegin(), subsets_ascending.rend());
  return result;
}

double iou(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

std::vector<int> match_detections(const std::vector<Prediction>& preds,
                                  const std::vector<GroundTruthObject>& gts,
                                  double iou_threshold, bool class_agnostic) {
  if (iou_threshold < 0.0)
    throw ContractError("match_detections: iou_threshold must be >= 0");
  const std::string* image_id = nullptr;
  for (const auto& p : preds) {
    if (image_id && p.image_id != *image_id)
      throw ContractError("match_detections: mixed image_ids");
    image_id = &p.image_id;
  }
  for (const auto& g : gts) {
    if (image_id && g.image_id != *image_id)
      throw ContractError("match_detections: mixed image_ids");
    image_id = &g.image_id;
  }

  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });

  std::vector<int> pred_to_gt(preds.size(), -1);
  std::vector<bool> gt_taken(gts.size(), false);
  for (std::size_t pi : order) {
    const auto& p = preds[pi];
    int best_gt = -1;
    double best_iou = iou_threshold;  // strict: must exceed this
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi]) continue;
      if (!class_agnostic && gts[gi].class_id != p.class_id) continue;
      const double v = iou(p.box, gts[gi].box);
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      pred_to_gt[pi] = best_gt;
      gt_taken[static_cast<std::size_t>(best_gt)] = true;
    }
  }
  return pred_to_gt;
}

std::vector<double> default_score_thresholds() {
  std::vector<double> out;
  for (int k = 15; k <= 90; k += 5) out.push_back(k / 100.0);
  return out;
}

namespace {

struct PerImage {
  std::vector<Prediction> preds;
  std::vector<GroundTruthObject> gts;
};

std::map<std::string, PerImage> group_by_image(
    const std::vector<Prediction>& preds,
    const std::vector<GroundTruthObject>& gts) {
  std::map<std::string, PerImage> images;
  for (const auto& p : preds) images[p.image_id].preds.push_back(p);
  for (const auto& g : gts) images[g.image_id].gts.push_back(g);
  return images;
}

}  // namespace

std::vector<PrPoint> pr_curve(const std::vector<Prediction>& preds,
                              const std::vector<GroundTruthObject>& gts,
                              const std::vector<double>& score_thresholds,
                              double iou_threshold, bool class_agnostic) {
  const auto images = group_by_image(preds, gts);
  std::vector<PrPoint> curve;
  curve.reserve(score_thresholds.size());
  for (double t : score_thresholds) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& [id, bundle] : images) {
      std::vector<Prediction> kept;
      for (const auto& p : bundle.preds)
        if (p.score >= t) kept.push_back(p);
      const auto matches =
          match_detections(kept, bundle.gts, iou_threshold, class_agnostic);
      long matched = 0;
      for (int m : matches)
        if (m >= 0) ++matched;
      tp += matched;
      fp += static_cast<long>(kept.size()) - matched;
      fn += static_cast<long>(bundle.gts.size()) - matched;
    }
    PrPoint point;
    point.threshold = t;
    point.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    point.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    curve.push_back(point);
  }
  return curve;
}

double f1_of(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

double f1_sweep(const std::vector<PrPoint>& curve) {
  if (curve.empty()) throw ContractError("f1_sweep: empty curve");
  double best = 0.0;
  for (const auto& p : curve) best = std::max(best, f1_of(p.precision, p.recall));
  return best;
}

double average_precision(const std::vector<Prediction>& preds,
                         const std::vector<GroundTruthObject>& gts,
                         double iou_threshold, bool class_agnostic) {
  if (gts.empty()) return 0.0;
  if (preds.empty()) return 0.0;

  // Global score-descending order; matching is still per image.
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });

  std::unordered_map<std::string, std::vector<const GroundTruthObject*>> gt_by_image;
  for (const auto& g : gts) gt_by_image[g.image_id].push_back(&g);
  std::unordered_map<std::string, std::vector<bool>> taken;
  for (auto& [id, v] : gt_by_image) taken[id].assign(v.size(), false);

  const auto total_gt = static_cast<double>(gts.size());
  std::vector<double> precisions, recalls;
  precisions.reserve(preds.size());
  recalls.reserve(preds.size());
  long tp = 0;
  long seen = 0;
  for (std::size_t pi : order) {
    const auto& p = preds[pi];
    ++seen;
    const auto it = gt_by_image.find(p.image_id);
    int best_gt = -1;
    double best_iou = iou_threshold;
    if (it != gt_by_image.end()) {
      auto& flags = taken[p.image_id];
      for (std::size_t gi = 0; gi < it->second.size(); ++gi) {
        if (flags[gi]) continue;
        const auto* g = it->second[gi];
        if (!class_agnostic && g->class_id != p.class_id) continue;
        const double v = iou(p.box, g->box);
        if (v > best_iou) {
          best_iou = v;
          best_gt = static_cast<int>(gi);
        }
      }
      if (best_gt >= 0) {
        flags[static_cast<std::size_t>(best_gt)] = true;
        ++tp;
      }
    }
    precisions.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    recalls.push_back(static_cast<double>(tp) / total_gt);
  }

  // Precision envelope, integrated over every recall step.
  for (std::size_t i = precisions.size() - 1; i > 0; --i)
    precisions[i - 1] = std::max(precisions[i - 1], precisions[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recalls.size(); ++i) {
    ap += (recalls[i] - prev_recall) * precisions[i];
    prev_recall = recalls[i];
  }
  return ap;
}

double mean_average_precision(const std::vector<Prediction>& preds,
                              const std::vector<GroundTruthObject>& gts,
                              int class_count, double iou_threshold) {
  if (class_count < 1) throw ContractError("mean_average_precision: no classes");
  double sum = 0.0;
  int included = 0;
  for (int c = 0; c < class_count; ++c) {
    std::vector<Prediction> cp;
    std::vector<GroundTruthObject> cg;
    for (const auto& p : preds)
      if (p.class_id == c) cp.push_back(p);
    for (const auto& g : gts)
      if (g.class_id == c) cg.push_back(g);
    if (cp.empty() && cg.empty()) continue;
    ++included;
    if (!cg.empty()) sum += average_precision(cp, cg, iou_threshold, false);
  }
  return included > 0 ? sum / included : 0.0;
}

MetricReport evaluate_detections(const std::vector<Prediction>& preds,
                                 const std::vector<GroundTruthObject>& gts,
                                 const std::vector<std::string>& class_names,
                                 const std::vector<double>& score_thresholds,
                                 double iou_threshold) {
  if (score_thresholds.empty())
    throw ContractError("evaluate_detections: no score thresholds");
  MetricReport report;
  report.class_names = class_names;
  report.level1_curve = pr_curve(preds, gts, score_thresholds, iou_threshold, true);
  report.level1_f1 = f1_sweep(report.level1_curve);
  report.level1_f1_fixed = f1_of(report.level1_curve.front().precision,
                                 report.level1_curve.front().recall);
  report.level1_ap = average_precision(preds, gts, iou_threshold, true);
  report.level2_map = mean_average_precision(
      preds, gts, static_cast<int>(class_names.size()), iou_threshold);
  for (int c = 0; c < static_cast<int>(class_names.size()); ++c) {
    std::vector<Prediction> cp;
    std::vector<GroundTruthObject> cg;
    for (const auto& p : preds)
      if (p.class_id == c) cp.push_back(p);
    for (const auto& g : gts)
      if (g.class_id == c) cg.push_back(g);
    if (cp.empty() && cg.empty())
      report.per_class_ap.push_back(-1.0);
    else
      report.per_class_ap.push_back(
          cg.empty() ? 0.0 : average_precision(cp, cg, iou_threshold, false));
  }
  return report;
}

namespace {

json parse_line(const std::string& line, std::size_t line_no, const char* what) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("unparseable ") + what + " record: " + e.what(),
                      line_no);
  }
}

BBox box_from_json(const json& j, std::size_t line_no) {
  for (const char* key : {"xmin", "ymin", "xmax", "ymax"})
    if (!j.contains(key))
      throw FormatError(std::string("box record missing key '") + key + "'", line_no);
  BBox box{j.at("xmin").get<double>(), j.at("ymin").get<double>(),
           j.at("xmax").get<double>(), j.at("ymax").get<double>()};
  validate(box);
  return box;
}

int class_id_from_json(const json& j, const std::vector<std::string>& vocab,
                       std::size_t line_no) {
  const std::string name = j.at("class").get<std::string>();
  const auto it = std::find(vocab.begin(), vocab.end(), name);
  if (it == vocab.end())
    throw ValidationError("unknown class name '" + name + "' at line " +
                          std::to_string(line_no));
  return static_cast<int>(it - vocab.begin());
}

}  // namespace

std::pair<std::vector<GroundTruthObject>, std::vector<std::string>>
load_ground_truth(const std::string& path, std::vector<std::string> vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground-truth file: " + path);

  std::vector<std::pair<json, std::size_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line, line_no, "ground-truth");
    if (!j.contains("image_id") || !j.contains("class"))
      throw FormatError("ground-truth record missing image_id/class", line_no);
    names.insert(j.at("class").get<std::string>());
    rows.emplace_back(std::move(j), line_no);
  }
  if (vocab.empty()) vocab.assign(names.begin(), names.end());

  std::vector<GroundTruthObject> objects;
  objects.reserve(rows.size());
  for (const auto& [j, ln] : rows) {
    GroundTruthObject obj;
    obj.image_id = j.at("image_id").get<std::string>();
    obj.box = box_from_json(j, ln);
    obj.class_id = class_id_from_json(j, vocab, ln);
    objects.push_back(std::move(obj));
  }
  return {std::move(objects), std::move(vocab)};
}

std::vector<Prediction> load_predictions(const std::string& path,
                                         const std::vector<std::string>& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open prediction file: " + path);
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "prediction");
    for (const char* key : {"image_id", "class", "score"})
      if (!j.contains(key))
        throw FormatError(std::string("prediction record missing key '") + key + "'",
                          line_no);
    Prediction p;
    p.image_id = j.at("image_id").get<std::string>();
    p.box = box_from_json(j, line_no);
    p.class_id = class_id_from_json(j, vocab, line_no);
    p.score = j.at("score").get<double>();
    if (p.score < 0.0 || p.score > 1.0)
      throw ValidationError("score outside [0,1] at line " + std::to_string(line_no));
    preds.push_back(std::move(p));
  }
  return preds;
}

std::vector<ImageInfo> load_image_infos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open image index: " + path);
  std::vector<ImageInfo> infos;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "image");
    for (const char* key : {"image_id", "width", "height"})
      if (!j.contains(key))
        throw FormatError(std::string("image record missing key '") + key + "'",
                          line_no);
    ImageInfo info{j.at("image_id").get<std::string>(), j.at("width").get<int>(),
                   j.at("height").get<int>()};
    if (info.width < 1 || info.height < 1)
      throw ValidationError("non-positive image dimensions at line " +
                            std::to_string(line_no));
    if (!seen.insert(info.image_id).second)
      throw ValidationError("duplicate image_id '" + info.image_id + "' at line " +
                            std::to_string(line_no));
    infos.push_back(std::move(info));
  }
  return infos;
}

DetectionDataset load_detection_dataset(const std::string& images_path,
                                        const std::string& gt_path,
                                        std::vector<std::string> vocab) {
  DetectionDataset dataset;
  dataset.images = load_image_infos(images_path);
  auto [objects, names] = load_ground_truth(gt_path, std::move(vocab));
  dataset.class_vocabulary = std::move(names);

  std::unordered_map<std::string, const ImageInfo*> by_id;
  for (const auto& info : dataset.images) by_id[info.image_id] = &info;
  for (auto& obj : objects) {
    const auto it = by_id.find(obj.image_id);
    if (it == by_id.end())
      throw ValidationError("ground truth references unknown image " + obj.image_id);
    // Clip to image bounds; fully-outside boxes are dropped.
    obj.box.xmin = std::max(obj.box.xmin, 0.0);
    obj.box.ymin = std::max(obj.box.ymin, 0.0);
    obj.box.xmax = std::min(obj.box.xmax, static_cast<double>(it->second->width));
    obj.box.ymax = std::min(obj.box.ymax, static_cast<double>(it->second->height));
    if (obj.box.xmax > obj.box.xmin && obj.box.ymax > obj.box.ymin)
      dataset.objects.push_back(std::move(obj));
  }
  return dataset;
}

}  // namespace mocotp::det
