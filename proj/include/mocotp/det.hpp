#pragma once

#include <string>
#include <vector>

#include "mocotp/rng.hpp"

namespace mocotp::det {

struct BBox {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  double area() const { return (xmax - xmin) * (ymax - ymin); }
};

void validate(const BBox& box);

struct GroundTruthObject {
  BBox box;
  int class_id = 0;
  std::string image_id;
};

struct Prediction {
  BBox box;
  int class_id = 0;
  double score = 0.0;
  std::string image_id;
};

struct ImageInfo {
  std::string image_id;
  int width = 0;
  int height = 0;
};

struct DetectionDataset {
  std::vector<ImageInfo> images;
  std::vector<GroundTruthObject> objects;  // clipped to image bounds on ingest
  std::vector<std::string> class_vocabulary;
};

struct TileSpec {
  int tile_size = 512;
  int overlap = 128;
  int stride() const { return tile_size - overlap; }
};

void validate(const TileSpec& spec);

struct TileWindow {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

// Stride tile_size - overlap in both axes; the final window per axis is
// snapped back so it ends exactly at the border. Images smaller than the
// tile yield one full-image window along that axis.
std::vector<TileWindow> tile_image(int width, int height, const TileSpec& spec);

struct Tile {
  std::string image_id;
  TileWindow window;
  std::vector<GroundTruthObject> objects;  // tile-local, clipped
};

struct TileClassification {
  std::vector<Tile> positives;
  std::vector<Tile> negatives;
};

// A tile is positive iff any ground-truth box intersects it with positive
// area. Intersecting objects are re-expressed in the tile frame and clipped;
// slivers below 10% of the original box area are not assigned.
TileClassification classify_tiles(const DetectionDataset& dataset,
                                  const TileSpec& spec);

std::vector<Tile> subsample_negative_tiles(const std::vector<Tile>& negatives,
                                           double keep_ratio, Rng& rng);

struct MatriochkaResult {
  // Image-id subsets parallel to the input fractions (descending); each
  // smaller subset is contained in every larger one.
  std::vector<std::vector<std::string>> subsets;
  std::vector<std::string> warnings;
};

// Nested class-preserving subsets at whole-image granularity. The smallest
// subset is grown greedily, adding whichever image keeps the class
// proportions closest to the full dataset (L1 divergence, overshoot
// penalized); each larger target then grows the previous subset.
MatriochkaResult matriochka_sample(const DetectionDataset& dataset,
                                   const std::vector<double>& target_fractions,
                                   Rng& rng, double proportion_tolerance = 0.03);

double iou(const BBox& a, const BBox& b);

// Greedy one-to-one matching: predictions in descending score order claim
// the unmatched ground truth with the highest IoU strictly above the
// threshold (same class required unless class_agnostic). Returns, for each
// prediction in input order, the matched ground-truth index or -1.
std::vector<int> match_detections(const std::vector<Prediction>& preds,
                                  const std::vector<GroundTruthObject>& gts,
                                  double iou_threshold, bool class_agnostic);

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
};

// 0.15 to 0.90 in steps of 0.05.
std::vector<double> default_score_thresholds();

// Aggregates TP/FP/FN over all images at each score threshold. Precision is
// 1.0 when nothing is predicted; recall is 1.0 when there is nothing to find.
std::vector<PrPoint> pr_curve(const std::vector<Prediction>& preds,
                              const std::vector<GroundTruthObject>& gts,
                              const std::vector<double>& score_thresholds,
                              double iou_threshold, bool class_agnostic);

double f1_of(double precision, double recall);
// Max F1 over the curve.
double f1_sweep(const std::vector<PrPoint>& curve);

// All-points interpolated area under the precision envelope.
double average_precision(const std::vector<Prediction>& preds,
                         const std::vector<GroundTruthObject>& gts,
                         double iou_threshold, bool class_agnostic);

// Unweighted mean of class-aware APs. Classes with neither ground truths
// nor predictions are excluded; classes with ground truths but no
// predictions contribute 0.
double mean_average_precision(const std::vector<Prediction>& preds,
                              const std::vector<GroundTruthObject>& gts,
                              int class_count, double iou_threshold);

struct MetricReport {
  std::vector<PrPoint> level1_curve;
  double level1_f1 = 0.0;        // max over the sweep
  double level1_f1_fixed = 0.0;  // at the first sweep threshold (0.15)
  double level1_ap = 0.0;
  double level2_map = 0.0;
  std::vector<double> per_class_ap;  // class-aware AP, -1 for excluded classes
  std::vector<std::string> class_names;
};

MetricReport evaluate_detections(const std::vector<Prediction>& preds,
                                 const std::vector<GroundTruthObject>& gts,
                                 const std::vector<std::string>& class_names,
                                 const std::vector<double>& score_thresholds,
                                 double iou_threshold);

// JSON-lines file formats. Ground truth: {image_id, xmin, ymin, xmax, ymax,
// class}; predictions add score. When `vocab` is empty the ground-truth
// loader derives it (sorted unique class names).
std::pair<std::vector<GroundTruthObject>, std::vector<std::string>>
load_ground_truth(const std::string& path, std::vector<std::string> vocab = {});
std::vector<Prediction> load_predictions(const std::string& path,
                                         const std::vector<std::string>& vocab);
std::vector<ImageInfo> load_image_infos(const std::string& path);

DetectionDataset load_detection_dataset(const std::string& images_path,
                                        const std::string& gt_path,
                                        std::vector<std::string> vocab = {});

}  // namespace mocotp::det
