#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mocotp/det.hpp"
#include "mocotp/error.hpp"

using namespace mocotp;
using namespace mocotp::det;
namespace fs = std::filesystem;

namespace {

Prediction pred(const std::string& img, double x0, double y0, double x1, double y1,
                int cls, double score) {
  return {{x0, y0, x1, y1}, cls, score, img};
}

GroundTruthObject gt(const std::string& img, double x0, double y0, double x1,
                     double y1, int cls) {
  return {{x0, y0, x1, y1}, cls, img};
}

BBox random_box(Rng& rng, double extent = 10.0) {
  const double x0 = rng.uniform(0.0, extent);
  const double y0 = rng.uniform(0.0, extent);
  return {x0, y0, x0 + rng.uniform(0.5, extent / 2), y0 + rng.uniform(0.5, extent / 2)};
}

// Independent AP oracle: recompute the TP/FP sequence with its own greedy
// matcher, then integrate the envelope by scanning every rank for the best
// precision at or beyond each recall level.
double ap_oracle(std::vector<Prediction> preds,
                 const std::vector<GroundTruthObject>& gts, double thr,
                 bool class_agnostic) {
  if (gts.empty() || preds.empty()) return 0.0;
  std::stable_sort(preds.begin(), preds.end(),
                   [](const Prediction& a, const Prediction& b) {
                     return a.score > b.score;
                   });
  std::vector<bool> taken(gts.size(), false);
  std::vector<int> is_tp;
  for (const auto& p : preds) {
    int best = -1;
    double best_iou = thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].image_id != p.image_id) continue;
      if (!class_agnostic && gts[g].class_id != p.class_id) continue;
      const double v = iou(p.box, gts[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      is_tp.push_back(1);
    } else {
      is_tp.push_back(0);
    }
  }
  std::vector<double> precision, recall;
  int tp = 0;
  for (std::size_t i = 0; i < is_tp.size(); ++i) {
    tp += is_tp[i];
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
  }
  double ap = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] <= prev) continue;
    double env = 0.0;
    for (std::size_t j = 0; j < recall.size(); ++j)
      if (recall[j] >= recall[i]) env = std::max(env, precision[j]);
    ap += (recall[i] - prev) * env;
    prev = recall[i];
  }
  return ap;
}

double map_oracle(const std::vector<Prediction>& preds,
                  const std::vector<GroundTruthObject>& gts, int classes,
                  double thr) {
  double sum = 0.0;
  int included = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<Prediction> cp;
    std::vector<GroundTruthObject> cg;
    for (const auto& p : preds)
      if (p.class_id == c) cp.push_back(p);
    for (const auto& g : gts)
      if (g.class_id == c) cg.push_back(g);
    if (cp.empty() && cg.empty()) continue;
    ++included;
    sum += ap_oracle(cp, cg, thr, false);
  }
  return included ? sum / included : 0.0;
}

struct RandomFixture {
  std::vector<Prediction> preds;
  std::vector<GroundTruthObject> gts;
};

RandomFixture random_fixture(Rng& rng, int max_preds = 6, int max_gts = 4,
                             int classes = 3) {
  RandomFixture fx;
  const int n_images = 1 + static_cast<int>(rng.uniform_below(2));
  const int n_gts = static_cast<int>(rng.uniform_below(max_gts + 1));
  const int n_preds = static_cast<int>(rng.uniform_below(max_preds + 1));
  for (int i = 0; i < n_gts; ++i)
    fx.gts.push_back({random_box(rng),
                      static_cast<int>(rng.uniform_below(classes)),
                      "img" + std::to_string(rng.uniform_below(n_images))});
  for (int i = 0; i < n_preds; ++i)
    fx.preds.push_back({random_box(rng),
                        static_cast<int>(rng.uniform_below(classes)),
                        rng.uniform(),
                        "img" + std::to_string(rng.uniform_below(n_images))});
  return fx;
}

}  // namespace

TEST_CASE("iou closed forms") {
  const BBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
  CHECK(iou(a, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(iou(a, {1, 1, 1, 2}), ValidationError);
}

TEST_CASE("iou symmetry and bounds on random boxes") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const BBox a = random_box(rng);
    const BBox b = random_box(rng);
    const double ab = iou(a, b);
    CHECK(ab == doctest::Approx(iou(b, a)));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("tiling matches the stride arithmetic") {
  const TileSpec spec;  // 512 / 128
  CHECK(spec.stride() == 384);

  const auto exact = tile_image(512, 512, spec);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].x0 == 0);
  CHECK(exact[0].x1 == 512);

  const auto two = tile_image(896, 512, spec);
  REQUIRE(two.size() == 2);
  CHECK(two[0].x0 == 0);
  CHECK(two[1].x0 == 384);
  CHECK(two[1].x1 == 896);

  const auto nine = tile_image(1000, 1000, spec);
  REQUIRE(nine.size() == 9);
  std::set<int> xs, ys;
  for (const auto& w : nine) {
    xs.insert(w.x0);
    ys.insert(w.y0);
    CHECK(w.width() == 512);
    CHECK(w.height() == 512);
  }
  CHECK(xs == std::set<int>{0, 384, 488});
  CHECK(ys == std::set<int>{0, 384, 488});

  // smaller than a tile -> one full-image window
  const auto small = tile_image(300, 200, spec);
  REQUIRE(small.size() == 1);
  CHECK(small[0].x1 == 300);
  CHECK(small[0].y1 == 200);
}

TEST_CASE("tiling covers the image and keeps the overlap floor") {
  Rng rng(2);
  const TileSpec spec{64, 16};
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 32 + static_cast<int>(rng.uniform_below(300));
    const int h = 32 + static_cast<int>(rng.uniform_below(300));
    const auto windows = tile_image(w, h, spec);

    std::vector<std::vector<bool>> covered(static_cast<std::size_t>(h),
                                           std::vector<bool>(static_cast<std::size_t>(w), false));
    for (const auto& win : windows)
      for (int y = win.y0; y < win.y1; ++y)
        for (int x = win.x0; x < win.x1; ++x)
          covered[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = true;
    for (const auto& row : covered)
      for (bool c : row) CHECK(c);

    // adjacent origins along an axis overlap by at least the configured amount
    std::set<int> xs;
    for (const auto& win : windows) xs.insert(win.x0);
    std::vector<int> sorted_xs(xs.begin(), xs.end());
    for (std::size_t i = 1; i < sorted_xs.size(); ++i)
      if (w > spec.tile_size)
        CHECK(sorted_xs[i - 1] + spec.tile_size - sorted_xs[i] >= spec.overlap);
  }
}

TEST_CASE("tile classification geometry") {
  DetectionDataset ds;
  ds.class_vocabulary = {"car"};
  ds.images = {{"empty", 1000, 1000}, {"scene", 1000, 1000}};
  // x in [400, 480] hits windows [0,512] and [384,896] but not the
  // border-snapped [488,1000]; y stays inside the first row of tiles.
  ds.objects.push_back(gt("scene", 400, 10, 480, 60, 0));
  // fully inside the (0,0) tile's exclusive core
  ds.objects.push_back(gt("scene", 10, 100, 60, 150, 0));

  const TileSpec spec;
  const auto result = classify_tiles(ds, spec);

  std::map<std::string, int> pos_per_image;
  for (const auto& t : result.positives) ++pos_per_image[t.image_id];
  CHECK(pos_per_image.count("empty") == 0);  // empty image: all negative
  CHECK(pos_per_image["scene"] == 2);        // straddler's two tiles; core on one

  for (const auto& t : result.positives) {
    for (const auto& obj : t.objects) {
      CHECK(obj.box.xmin >= 0.0);
      CHECK(obj.box.xmax <= spec.tile_size);
      CHECK(obj.box.xmax > obj.box.xmin);
    }
  }
  CHECK(result.positives.size() + result.negatives.size() == 9 * 2);
}

TEST_CASE("slivers below a tenth of the box are not assigned") {
  DetectionDataset ds;
  ds.class_vocabulary = {"car"};
  ds.images = {{"scene", 1000, 1000}};
  // 100 wide; only 5 px (5% of area) reach into the second x-tile at 384,
  // and y stays within the first row of tiles.
  ds.objects.push_back(gt("scene", 289, 100, 389, 150, 0));

  const auto result = classify_tiles(ds, TileSpec{});
  int with_obj = 0, positive_empty = 0;
  for (const auto& t : result.positives) {
    if (!t.objects.empty())
      ++with_obj;
    else
      ++positive_empty;
  }
  CHECK(with_obj == 1);        // the core tile keeps the box
  CHECK(positive_empty == 1);  // the sliver tile is positive but unassigned
}

TEST_CASE("negative subsampling counts") {
  std::vector<Tile> negatives(1000);
  Rng rng(3);
  CHECK(subsample_negative_tiles(negatives, 1.0, rng).size() == 1000);
  CHECK(subsample_negative_tiles(negatives, 0.0, rng).size() == 0);
  CHECK(subsample_negative_tiles(negatives, 0.2, rng).size() == 200);
}

TEST_CASE("matriochka identity and symmetric cases") {
  DetectionDataset ds;
  ds.class_vocabulary = {"car"};
  for (int i = 0; i < 10; ++i) {
    const std::string id = "img" + std::to_string(i);
    ds.images.push_back({id, 100, 100});
    ds.objects.push_back(gt(id, 1, 1, 5, 5, 0));
  }

  Rng rng(4);
  const auto full = matriochka_sample(ds, {1.0}, rng);
  CHECK(full.subsets[0].size() == 10);

  const auto nested = matriochka_sample(ds, {0.5, 0.1}, rng);
  REQUIRE(nested.subsets.size() == 2);
  CHECK(nested.subsets[0].size() == 5);
  CHECK(nested.subsets[1].size() == 1);
  const std::set<std::string> larger(nested.subsets[0].begin(), nested.subsets[0].end());
  for (const auto& id : nested.subsets[1]) CHECK(larger.count(id) == 1);
}

namespace {

// Proportions shaped like the vehicle-category long tail.
DetectionDataset table_like_dataset(Rng& rng) {
  DetectionDataset ds;
  ds.class_vocabulary = {"civilian", "military", "armored", "gse",
                         "launcher", "electronics", "he", "le"};
  const std::vector<double> weights{0.575, 0.254, 0.140, 0.007,
                                    0.012, 0.006, 0.004, 0.003};
  const int n_images = 60;
  for (int i = 0; i < n_images; ++i) {
    const std::string id = "raster" + std::to_string(i);
    ds.images.push_back({id, 2000, 2000});
    const int objects = 30 + static_cast<int>(rng.uniform_below(120));
    for (int k = 0; k < objects; ++k) {
      const double u = rng.uniform();
      double acc = 0.0;
      int cls = 0;
      for (std::size_t c = 0; c < weights.size(); ++c) {
        acc += weights[c];
        if (u < acc) {
          cls = static_cast<int>(c);
          break;
        }
      }
      const double x = rng.uniform(0.0, 1900.0), y = rng.uniform(0.0, 1900.0);
      ds.objects.push_back(gt(id, x, y, x + 8, y + 4, cls));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("matriochka nests and preserves dominant proportions") {
  Rng data_rng(5);
  const auto ds = table_like_dataset(data_rng);
  long total = static_cast<long>(ds.objects.size());
  std::vector<long> full_counts(8, 0);
  for (const auto& o : ds.objects) ++full_counts[static_cast<std::size_t>(o.class_id)];

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const auto result = matriochka_sample(ds, {0.5, 0.1}, rng);
    REQUIRE(result.subsets.size() == 2);

    const std::set<std::string> xs(result.subsets[0].begin(), result.subsets[0].end());
    const std::set<std::string> xxs(result.subsets[1].begin(), result.subsets[1].end());
    for (const auto& id : xxs) CHECK(xs.count(id) == 1);

    const std::vector<double> fractions{0.5, 0.1};
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
      const auto& ids = result.subsets[fi];
      const std::set<std::string> id_set(ids.begin(), ids.end());
      std::vector<long> counts(8, 0);
      long subtotal = 0;
      for (const auto& o : ds.objects)
        if (id_set.count(o.image_id)) {
          ++counts[static_cast<std::size_t>(o.class_id)];
          ++subtotal;
        }
      const double target = fractions[fi] * static_cast<double>(total);
      CHECK(std::abs(subtotal - target) <= 0.10 * target);
      for (int c = 0; c < 3; ++c) {  // dominant classes
        const double full_prop = static_cast<double>(full_counts[static_cast<std::size_t>(c)]) / total;
        const double prop = static_cast<double>(counts[static_cast<std::size_t>(c)]) / subtotal;
        CHECK(std::abs(prop - full_prop) <= 0.03);
      }
    }
  }
}

TEST_CASE("matcher honors the strict IoU-0 semantics") {
  // 0.01 overlap still matches at threshold 0
  const auto m1 = match_detections({pred("i", 0, 0, 10, 10, 0, 0.9)},
                                   {gt("i", 9.9, 9.9, 20, 20, 0)}, 0.0, true);
  CHECK(m1[0] == 0);

  // exactly touching boxes never match
  const auto m2 = match_detections({pred("i", 0, 0, 1, 1, 0, 0.9)},
                                   {gt("i", 1, 0, 2, 1, 0)}, 0.0, true);
  CHECK(m2[0] == -1);
}

TEST_CASE("matcher resolves score and IoU competition") {
  // two predictions, one gt: the higher score claims it
  const auto m = match_detections({pred("i", 0, 0, 10, 10, 0, 0.9),
                                   pred("i", 1, 1, 9, 9, 0, 0.8)},
                                  {gt("i", 2, 2, 8, 8, 0)}, 0.0, true);
  CHECK(m[0] == 0);
  CHECK(m[1] == -1);

  // one prediction, two gts: picks the larger IoU
  const auto m2 = match_detections(
      {pred("i", 0, 0, 10, 10, 0, 0.9)},
      {gt("i", 0, 0, 40, 10, 0), gt("i", 1, 1, 10, 11, 0)}, 0.0, true);
  CHECK(m2[0] == 1);

  // class-aware mode refuses cross-class matches
  const auto m3 = match_detections({pred("i", 0, 0, 10, 10, 1, 0.9)},
                                   {gt("i", 0, 0, 10, 10, 0)}, 0.0, false);
  CHECK(m3[0] == -1);

  CHECK_THROWS_AS(match_detections({pred("a", 0, 0, 1, 1, 0, 0.5)},
                                   {gt("b", 0, 0, 1, 1, 0)}, 0.0, true),
                  ContractError);
}

TEST_CASE("matching is one-to-one on random fixtures") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto fx = random_fixture(rng, 8, 6, 2);
    const auto matches = match_detections(
        [&] {
          // single-image variant
          for (auto& p : fx.preds) p.image_id = "one";
          for (auto& g : fx.gts) g.image_id = "one";
          return fx.preds;
        }(),
        fx.gts, 0.0, true);
    std::set<int> used;
    for (int m : matches)
      if (m >= 0) CHECK(used.insert(m).second);
  }
}

TEST_CASE("pr curve trivial conventions") {
  const std::vector<GroundTruthObject> gts{gt("i", 0, 0, 10, 10, 0)};
  const std::vector<Prediction> perfect{pred("i", 0, 0, 10, 10, 0, 0.95)};
  for (const auto& point :
       pr_curve(perfect, gts, default_score_thresholds(), 0.0, true)) {
    CHECK(point.precision == doctest::Approx(1.0));
    CHECK(point.recall == doctest::Approx(1.0));
  }

  for (const auto& point : pr_curve({}, gts, default_score_thresholds(), 0.0, true)) {
    CHECK(point.precision == doctest::Approx(1.0));
    CHECK(point.recall == doctest::Approx(0.0));
  }
  CHECK(default_score_thresholds().size() == 16);
  CHECK(default_score_thresholds().front() == doctest::Approx(0.15));
  CHECK(default_score_thresholds().back() == doctest::Approx(0.90));
}

TEST_CASE("pr curve matches a hand-computed fixture") {
  // 3 gts on one image; 5 preds with staged scores
  const std::vector<GroundTruthObject> gts{
      gt("i", 0, 0, 10, 10, 0), gt("i", 20, 20, 30, 30, 0), gt("i", 40, 40, 50, 50, 0)};
  const std::vector<Prediction> preds{
      pred("i", 0, 0, 10, 10, 0, 0.90),    // TP
      pred("i", 21, 21, 29, 29, 0, 0.60),  // TP
      pred("i", 70, 70, 80, 80, 0, 0.55),  // FP (disjoint)
      pred("i", 41, 41, 49, 49, 0, 0.30),  // TP
      pred("i", 90, 90, 95, 95, 0, 0.20),  // FP
  };
  const std::vector<double> thresholds{0.15, 0.25, 0.50, 0.65, 0.95};
  const auto curve = pr_curve(preds, gts, thresholds, 0.0, true);
  REQUIRE(curve.size() == 5);
  // t=0.15: all 5 kept -> TP 3, FP 2, FN 0
  CHECK(curve[0].precision == doctest::Approx(3.0 / 5.0));
  CHECK(curve[0].recall == doctest::Approx(1.0));
  // t=0.25: 4 kept -> TP 3, FP 1
  CHECK(curve[1].precision == doctest::Approx(3.0 / 4.0));
  CHECK(curve[1].recall == doctest::Approx(1.0));
  // t=0.50: 3 kept -> TP 2, FP 1, FN 1
  CHECK(curve[2].precision == doctest::Approx(2.0 / 3.0));
  CHECK(curve[2].recall == doctest::Approx(2.0 / 3.0));
  // t=0.65: 1 kept -> TP 1
  CHECK(curve[3].precision == doctest::Approx(1.0));
  CHECK(curve[3].recall == doctest::Approx(1.0 / 3.0));
  // t=0.95: none kept -> precision convention 1.0
  CHECK(curve[4].precision == doctest::Approx(1.0));
  CHECK(curve[4].recall == doctest::Approx(0.0));
}

TEST_CASE("f1 sweep equals a linear scan") {
  CHECK(f1_sweep({{0.5, 1.0, 1.0}}) == doctest::Approx(1.0));
  CHECK(f1_sweep({{0.5, 0.5, 0.5}}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(f1_sweep({}), ContractError);

  Rng rng(7);
  std::vector<PrPoint> curve;
  for (int i = 0; i < 16; ++i)
    curve.push_back({0.15 + 0.05 * i, rng.uniform(), rng.uniform()});
  double best = 0.0;
  for (const auto& p : curve) {
    const double denom = p.precision + p.recall;
    best = std::max(best, denom > 0 ? 2 * p.precision * p.recall / denom : 0.0);
  }
  CHECK(f1_sweep(curve) == doctest::Approx(best));
}

TEST_CASE("average precision closed forms") {
  const std::vector<GroundTruthObject> gts{gt("i", 0, 0, 10, 10, 0)};
  // rank-1 FP then rank-2 TP -> AP = 0.5
  const std::vector<Prediction> preds{pred("i", 50, 50, 60, 60, 0, 0.9),
                                      pred("i", 0, 0, 10, 10, 0, 0.8)};
  CHECK(average_precision(preds, gts, 0.0, true) == doctest::Approx(0.5));

  // all gts found first, no FPs -> 1.0
  const std::vector<GroundTruthObject> gts2{gt("i", 0, 0, 10, 10, 0),
                                            gt("i", 20, 20, 30, 30, 0)};
  const std::vector<Prediction> preds2{pred("i", 0, 0, 10, 10, 0, 0.9),
                                       pred("i", 20, 20, 30, 30, 0, 0.85)};
  CHECK(average_precision(preds2, gts2, 0.0, true) == doctest::Approx(1.0));
}

TEST_CASE("ap and map agree with the exhaustive oracle on random fixtures") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto fx = random_fixture(rng);
    const double ap = average_precision(fx.preds, fx.gts, 0.0, true);
    CHECK(ap == doctest::Approx(ap_oracle(fx.preds, fx.gts, 0.0, true)).epsilon(1e-12));
    const double map = mean_average_precision(fx.preds, fx.gts, 3, 0.0);
    CHECK(map == doctest::Approx(map_oracle(fx.preds, fx.gts, 3, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("raising a matched prediction's score never lowers AP") {
  Rng rng(9);
  int exercised = 0;
  for (int trial = 0; trial < 80 && exercised < 30; ++trial) {
    auto fx = random_fixture(rng);
    if (fx.preds.empty() || fx.gts.empty()) continue;
    std::map<std::string, std::vector<Prediction>> by_img;
    const double before = average_precision(fx.preds, fx.gts, 0.0, true);
    // find one matched prediction via the per-image matcher
    int target = -1;
    for (std::size_t i = 0; i < fx.preds.size() && target < 0; ++i) {
      std::vector<Prediction> one{fx.preds[i]};
      std::vector<GroundTruthObject> same_img;
      for (const auto& g : fx.gts)
        if (g.image_id == fx.preds[i].image_id) same_img.push_back(g);
      if (!same_img.empty() &&
          match_detections(one, same_img, 0.0, true)[0] >= 0)
        target = static_cast<int>(i);
    }
    if (target < 0) continue;
    ++exercised;
    fx.preds[static_cast<std::size_t>(target)].score =
        std::min(1.0, fx.preds[static_cast<std::size_t>(target)].score + 0.5);
    const double after = average_precision(fx.preds, fx.gts, 0.0, true);
    CHECK(after >= before - 1e-12);
  }
  CHECK(exercised >= 10);
}

TEST_CASE("map closed forms and empty-class policy") {
  const std::vector<GroundTruthObject> gts{gt("i", 0, 0, 10, 10, 0)};
  const std::vector<Prediction> preds{pred("i", 0, 0, 10, 10, 0, 0.9)};
  CHECK(mean_average_precision(preds, gts, 1, 0.0) == doctest::Approx(1.0));

  // class 0 perfect (AP 1), class 1 has a gt but no prediction (AP 0),
  // classes 2..7 untouched -> mean over 2 classes
  std::vector<GroundTruthObject> gts2{gt("i", 0, 0, 10, 10, 0),
                                      gt("i", 30, 30, 40, 40, 1)};
  CHECK(mean_average_precision(preds, gts2, 8, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("detection report carries both f1 variants") {
  const std::vector<GroundTruthObject> gts{gt("i", 0, 0, 10, 10, 0)};
  const std::vector<Prediction> preds{pred("i", 0, 0, 10, 10, 0, 0.4)};
  const auto report = evaluate_detections(preds, gts, {"car", "truck"},
                                          default_score_thresholds(), 0.0);
  CHECK(report.level1_f1 == doctest::Approx(1.0));
  // at 0.4 < 0.15? no: the fixed threshold keeps the prediction, so F1 = 1
  CHECK(report.level1_f1_fixed == doctest::Approx(1.0));
  CHECK(report.level1_ap == doctest::Approx(1.0));
  CHECK(report.level2_map == doctest::Approx(1.0));
  REQUIRE(report.per_class_ap.size() == 2);
  CHECK(report.per_class_ap[0] == doctest::Approx(1.0));
  CHECK(report.per_class_ap[1] == -1.0);  // untouched class excluded
}

TEST_CASE("ground truth and prediction files round-trip with validation") {
  const auto dir = fs::temp_directory_path() / "mocotp_det_files";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto gt_path = (dir / "gt.jsonl").string();
  const auto pred_path = (dir / "pred.jsonl").string();
  {
    std::ofstream out(gt_path);
    out << R"({"image_id":"a","xmin":0,"ymin":0,"xmax":10,"ymax":10,"class":"car"})" << "\n";
    out << R"({"image_id":"a","xmin":5,"ymin":5,"xmax":9,"ymax":9,"class":"truck"})" << "\n";
  }
  {
    std::ofstream out(pred_path);
    out << R"({"image_id":"a","xmin":0,"ymin":0,"xmax":10,"ymax":10,"class":"car","score":0.75})" << "\n";
  }
  const auto [gts, vocab] = load_ground_truth(gt_path);
  CHECK(vocab == std::vector<std::string>{"car", "truck"});
  REQUIRE(gts.size() == 2);
  CHECK(gts[0].class_id == 0);

  const auto preds = load_predictions(pred_path, vocab);
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].score == doctest::Approx(0.75));

  {
    std::ofstream out(pred_path);
    out << R"({"image_id":"a","xmin":0,"ymin":0,"xmax":10,"ymax":10,"class":"spaceship","score":0.75})" << "\n";
  }
  CHECK_THROWS_AS(load_predictions(pred_path, vocab), ValidationError);
  {
    std::ofstream out(pred_path);
    out << R"({"image_id":"a","xmin":0,"ymin":0,"xmax":10,"ymax":10,"class":"car","score":1.5})" << "\n";
  }
  CHECK_THROWS_AS(load_predictions(pred_path, vocab), ValidationError);
  {
    std::ofstream out(pred_path);
    out << "not json\n";
  }
  CHECK_THROWS_AS(load_predictions(pred_path, vocab), FormatError);
}

TEST_CASE("detection dataset ingest clips to image bounds") {
  const auto dir = fs::temp_directory_path() / "mocotp_det_ds";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream out((dir / "images.jsonl").string());
    out << R"({"image_id":"a","width":100,"height":100})" << "\n";
  }
  {
    std::ofstream out((dir / "gt.jsonl").string());
    out << R"({"image_id":"a","xmin":90,"ymin":90,"xmax":150,"ymax":150,"class":"car"})" << "\n";
    out << R"({"image_id":"a","xmin":200,"ymin":200,"xmax":250,"ymax":250,"class":"car"})" << "\n";
  }
  const auto ds = load_detection_dataset((dir / "images.jsonl").string(),
                                         (dir / "gt.jsonl").string());
  REQUIRE(ds.objects.size() == 1);  // fully-outside box dropped
  CHECK(ds.objects[0].box.xmax == doctest::Approx(100.0));
  CHECK(ds.objects[0].box.ymax == doctest::Approx(100.0));
}
