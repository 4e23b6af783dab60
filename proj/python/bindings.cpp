#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mocotp/augment.hpp"
#include "mocotp/contrast.hpp"
#include "mocotp/error.hpp"
#include "mocotp/data.hpp"
#include "mocotp/det.hpp"
#include "mocotp/experiment.hpp"
#include "mocotp/probe.hpp"
#include "mocotp/rng.hpp"

namespace py = pybind11;
using namespace mocotp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d vector");
  return {a.data(), a.data() + a.shape(0)};
}

std::vector<std::vector<double>> to_rows(const Array& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2) throw std::invalid_argument("expected an (N, d) array");
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    rows[static_cast<std::size_t>(i)].assign(a.data() + i * a.shape(1),
                                             a.data() + (i + 1) * a.shape(1));
  return rows;
}

Image image_from_array(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3)
    throw std::invalid_argument("expected an (H, W, 3) array");
  Image img(3, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = a.at(y, x, c);
  return img;
}

py::array_t<float> image_to_array(const Image& img) {
  py::array_t<float> out({img.height, img.width, img.channels});
  auto view = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) view(y, x, c) = img.at(c, y, x);
  return out;
}

det::BBox box_from_tuple(const py::tuple& t, std::size_t offset) {
  return {t[offset].cast<double>(), t[offset + 1].cast<double>(),
          t[offset + 2].cast<double>(), t[offset + 3].cast<double>()};
}

// (image_id, xmin, ymin, xmax, ymax, class_id, score)
std::vector<det::Prediction> preds_from_list(const py::list& items) {
  std::vector<det::Prediction> preds;
  for (const auto& item : items) {
    const auto t = item.cast<py::tuple>();
    det::Prediction p;
    p.image_id = t[0].cast<std::string>();
    p.box = box_from_tuple(t, 1);
    p.class_id = t[5].cast<int>();
    p.score = t[6].cast<double>();
    preds.push_back(std::move(p));
  }
  return preds;
}

// (image_id, xmin, ymin, xmax, ymax, class_id)
std::vector<det::GroundTruthObject> gts_from_list(const py::list& items) {
  std::vector<det::GroundTruthObject> gts;
  for (const auto& item : items) {
    const auto t = item.cast<py::tuple>();
    det::GroundTruthObject g;
    g.image_id = t[0].cast<std::string>();
    g.box = box_from_tuple(t, 1);
    g.class_id = t[5].cast<int>();
    gts.push_back(std::move(g));
  }
  return gts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Momentum contrast with temporal positives: core operations";

  py::register_exception<Error>(m, "MocotpError");

  // ---- contrastive loss and queue ----
  py::class_<moco::MemoryQueue>(m, "MemoryQueue")
      .def(py::init<int, int>(), py::arg("capacity"), py::arg("dim"))
      .def("enqueue",
           [](moco::MemoryQueue& q, const FloatArray& keys,
              const std::vector<std::string>& group_ids) {
             if (keys.ndim() != 2)
               throw std::invalid_argument("keys must be (B, dim)");
             Tensor batch({static_cast<int>(keys.shape(0)),
                           static_cast<int>(keys.shape(1))});
             std::copy(keys.data(), keys.data() + keys.size(), batch.data.begin());
             q.enqueue(batch, group_ids);
           },
           py::arg("keys"), py::arg("group_ids"))
      .def_property_readonly("capacity", &moco::MemoryQueue::capacity)
      .def_property_readonly("fill_count", &moco::MemoryQueue::fill_count)
      .def_property_readonly("write_pointer", &moco::MemoryQueue::write_pointer)
      .def("group_id", &moco::MemoryQueue::group_id, py::arg("index"))
      .def("key", [](const moco::MemoryQueue& q, int i) {
        const auto k = q.key(i);
        py::array_t<float> out(
            std::vector<py::ssize_t>{static_cast<py::ssize_t>(k.size())});
        std::copy(k.begin(), k.end(), out.mutable_data());
        return out;
      });

  m.def("info_nce",
        [](const Array& q, const Array& k_plus, const Array& negatives, double tau) {
          return moco::info_nce(to_vector(q), to_vector(k_plus), to_rows(negatives), tau);
        },
        py::arg("q"), py::arg("k_plus"), py::arg("negatives"), py::arg("tau"));
  m.def("info_nce_grad",
        [](const Array& q, const Array& k_plus, const Array& negatives, double tau) {
          auto qv = to_vector(q);
          std::vector<double> dq(qv.size());
          const double loss =
              moco::info_nce_grad(qv, to_vector(k_plus), to_rows(negatives), tau, dq);
          py::array_t<double> grad(
              std::vector<py::ssize_t>{static_cast<py::ssize_t>(dq.size())});
          std::copy(dq.begin(), dq.end(), grad.mutable_data());
          return py::make_tuple(loss, std::move(grad));
        },
        py::arg("q"), py::arg("k_plus"), py::arg("negatives"), py::arg("tau"));
  m.def("masked_info_nce",
        [](const Array& q, const std::string& q_group, const Array& k_plus,
           const moco::MemoryQueue& queue, double tau) {
          return moco::masked_info_nce(to_vector(q), q_group, to_vector(k_plus),
                                       queue, tau);
        },
        py::arg("q"), py::arg("q_group"), py::arg("k_plus"), py::arg("queue"),
        py::arg("tau"));
  m.def("cosine_lr", &moco::cosine_lr, py::arg("step"), py::arg("total_steps"),
        py::arg("base_lr"));

  // ---- augmentation ----
  m.def("rot90",
        [](const FloatArray& img, int k) {
          return image_to_array(aug::rot90(image_from_array(img), k));
        },
        py::arg("image"), py::arg("k"));
  m.def("random_dihedral",
        [](const FloatArray& img, std::uint64_t seed) {
          Rng rng(seed);
          return image_to_array(aug::random_dihedral(image_from_array(img), rng));
        },
        py::arg("image"), py::arg("seed"));

  // ---- classification metrics ----
  m.def("macro_f1", &probe::macro_f1, py::arg("predictions"), py::arg("labels"),
        py::arg("num_classes"));

  // ---- detection toolkit ----
  m.def("iou",
        [](const py::tuple& a, const py::tuple& b) {
          return det::iou(box_from_tuple(a, 0), box_from_tuple(b, 0));
        },
        py::arg("box_a"), py::arg("box_b"));
  m.def("tile_image",
        [](int width, int height, int tile_size, int overlap) {
          const auto windows =
              det::tile_image(width, height, det::TileSpec{tile_size, overlap});
          py::list out;
          for (const auto& w : windows)
            out.append(py::make_tuple(w.x0, w.y0, w.x1, w.y1));
          return out;
        },
        py::arg("width"), py::arg("height"), py::arg("tile_size") = 512,
        py::arg("overlap") = 128);
  m.def("match_detections",
        [](const py::list& preds, const py::list& gts, double iou_threshold,
           bool class_agnostic) {
          return det::match_detections(preds_from_list(preds), gts_from_list(gts),
                                       iou_threshold, class_agnostic);
        },
        py::arg("predictions"), py::arg("ground_truths"),
        py::arg("iou_threshold") = 0.0, py::arg("class_agnostic") = true);
  m.def("pr_curve",
        [](const py::list& preds, const py::list& gts,
           const std::vector<double>& thresholds, double iou_threshold,
           bool class_agnostic) {
          const auto curve =
              det::pr_curve(preds_from_list(preds), gts_from_list(gts),
                            thresholds.empty() ? det::default_score_thresholds()
                                               : thresholds,
                            iou_threshold, class_agnostic);
          py::list out;
          for (const auto& p : curve)
            out.append(py::make_tuple(p.threshold, p.precision, p.recall));
          return out;
        },
        py::arg("predictions"), py::arg("ground_truths"),
        py::arg("thresholds") = std::vector<double>{}, py::arg("iou_threshold") = 0.0,
        py::arg("class_agnostic") = true);
  m.def("f1_sweep",
        [](const py::list& curve) {
          std::vector<det::PrPoint> points;
          for (const auto& item : curve) {
            const auto t = item.cast<py::tuple>();
            points.push_back({t[0].cast<double>(), t[1].cast<double>(),
                              t[2].cast<double>()});
          }
          return det::f1_sweep(points);
        },
        py::arg("curve"));
  m.def("average_precision",
        [](const py::list& preds, const py::list& gts, double iou_threshold,
           bool class_agnostic) {
          return det::average_precision(preds_from_list(preds), gts_from_list(gts),
                                        iou_threshold, class_agnostic);
        },
        py::arg("predictions"), py::arg("ground_truths"),
        py::arg("iou_threshold") = 0.0, py::arg("class_agnostic") = true);
  m.def("mean_average_precision",
        [](const py::list& preds, const py::list& gts, int class_count,
           double iou_threshold) {
          return det::mean_average_precision(preds_from_list(preds),
                                             gts_from_list(gts), class_count,
                                             iou_threshold);
        },
        py::arg("predictions"), py::arg("ground_truths"), py::arg("class_count"),
        py::arg("iou_threshold") = 0.0);

  // ---- config-driven runs ----
  m.def("run_pretrain",
        [](const std::string& config_path) {
          const auto artifacts =
              cli::run_pretrain(cli::load_experiment_config(config_path));
          py::dict out;
          out["checkpoint"] = artifacts.checkpoint_path;
          out["train_log"] = artifacts.log_path;
          py::list losses;
          for (const auto& e : artifacts.log) losses.append(e.mean_loss);
          out["epoch_losses"] = losses;
          return out;
        },
        py::arg("config_path"));
  m.def("run_probe_suite",
        [](const std::string& config_path, const std::string& checkpoint) {
          const auto artifacts = cli::run_probe_suite(
              cli::load_experiment_config(config_path), checkpoint);
          py::dict out;
          out["report"] = artifacts.report_path;
          out["table"] = artifacts.table;
          return out;
        },
        py::arg("config_path"), py::arg("checkpoint"));
  m.def("run_det_eval",
        [](const std::string& gt_file, const std::string& pred_file,
           const std::string& config_path) {
          const auto artifacts = cli::run_det_eval(
              gt_file, pred_file, cli::load_experiment_config(config_path));
          py::dict out;
          out["report"] = artifacts.report_path;
          out["level1_f1"] = artifacts.report.level1_f1;
          out["level1_ap"] = artifacts.report.level1_ap;
          out["level2_map"] = artifacts.report.level2_map;
          return out;
        },
        py::arg("ground_truth"), py::arg("predictions"), py::arg("config_path"));
  m.def("run_synth_gen",
        [](const std::string& config_path) {
          const auto artifacts =
              cli::run_synth_gen(cli::load_experiment_config(config_path));
          py::dict out;
          out["manifest"] = artifacts.manifest_path;
          out["records"] = artifacts.records;
          return out;
        },
        py::arg("config_path"));
}
