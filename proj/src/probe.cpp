#include "mocotp/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mocotp/error.hpp"

namespace mocotp::probe {

std::string to_string(ProbeMode mode) {
  return mode == ProbeMode::kFrozen ? "frozen" : "finetune";
}

ProbeMode probe_mode_from_string(const std::string& s) {
  if (s == "frozen") return ProbeMode::kFrozen;
  if (s == "finetune") return ProbeMode::kFinetune;
  throw ValidationError("unknown probe mode '" + s + "'");
}

ProbeConfig frozen_defaults() { return ProbeConfig{}; }

ProbeConfig finetune_defaults() {
  ProbeConfig cfg;
  cfg.mode = ProbeMode::kFinetune;
  cfg.weight_decay = 1e-4;
  return cfg;
}

void validate(const ProbeConfig& cfg) {
  if (!(cfg.head_lr >= 0.0) || !(cfg.backbone_lr >= 0.0))
    throw ContractError("ProbeConfig: learning rates must be non-negative");
  if (cfg.label_fraction <= 0.0 || cfg.label_fraction > 1.0)
    throw ContractError("ProbeConfig: label_fraction must be in (0,1]");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw ContractError("ProbeConfig: epochs/batch_size must be positive");
}

double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& labels, int num_classes) {
  if (predictions.size() != labels.size())
    throw ContractError("macro_f1: predictions/labels length mismatch");
  if (num_classes < 1) throw ContractError("macro_f1: need at least one class");
  std::vector<long> tp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes)
      throw ContractError("macro_f1: class index out of range");
    if (p == y) {
      ++tp[static_cast<std::size_t>(y)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const long denom = 2 * tp[i] + fp[i] + fn[i];
    sum += denom > 0 ? 2.0 * static_cast<double>(tp[i]) / static_cast<double>(denom) : 0.0;
  }
  return sum / num_classes;
}

EpochRecord select_best_epoch(const std::vector<EpochRecord>& history) {
  if (history.empty()) throw ContractError("select_best_epoch: empty history");
  const EpochRecord* best = &history.front();
  for (const auto& rec : history)
    if (rec.val_top1 > best->val_top1) best = &rec;
  return *best;
}

namespace {

std::vector<const data::ImageRecord*> labeled_records(const data::Manifest& m,
                                                      const char* where) {
  auto records = m.all_records();
  for (const auto* r : records)
    if (!r->class_label)
      throw ContractError(std::string(where) + ": unlabeled record " + r->image_id);
  return records;
}

// Mean cross-entropy over the batch; writes dLoss/dlogits.
double cross_entropy_grad(const Tensor& logits, const std::vector<int>& labels,
                          Tensor& dlogits) {
  const int n = logits.dim(0), c = logits.dim(1);
  double loss = 0.0;
  for (int b = 0; b < n; ++b) {
    double mx = logits.at(b, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(logits.at(b, j)));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(logits.at(b, j) - mx);
    const int y = labels[static_cast<std::size_t>(b)];
    loss += -(logits.at(b, y) - mx) + std::log(denom);
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(logits.at(b, j) - mx) / denom;
      dlogits.at(b, j) = static_cast<float>((p - (j == y ? 1.0 : 0.0)) / n);
    }
  }
  return loss / n;
}

aug::AugmentationConfig crop_only(const aug::AugmentationConfig& base) {
  aug::AugmentationConfig cfg = base;
  cfg.color_jitter_prob = 0.0;
  cfg.grayscale_prob = 0.0;
  cfg.blur_prob = 0.0;
  cfg.hflip_prob = 0.0;
  cfg.dihedral_enabled = false;
  return cfg;
}

ProbeResult train_classifier(moco::Encoder& encoder, const data::Manifest& train,
                             const data::Manifest& val, data::ImageStore& store,
                             const aug::AugmentationConfig& aug_cfg,
                             const ProbeConfig& cfg, std::uint64_t seed,
                             bool train_backbone) {
  validate(cfg);
  const auto records = labeled_records(train, "probe");
  if (records.empty()) throw ContractError("probe: empty training manifest");
  const int num_classes = static_cast<int>(train.class_vocabulary.size());
  const int d = encoder.config().embedding_dim;
  const int out_size = aug_cfg.output_size;

  Rng root(seed);
  ProbeResult result{nn::Linear("head", d, num_classes), {}};  // zero-init head

  nn::SgdOptimizer head_opt({&result.head.weight(), &result.head.bias()},
                            cfg.optimizer_momentum, cfg.weight_decay);
  std::unique_ptr<nn::SgdOptimizer> backbone_opt;
  if (train_backbone)
    backbone_opt = std::make_unique<nn::SgdOptimizer>(
        encoder.params(), cfg.optimizer_momentum, cfg.weight_decay);

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = root.substream("probe_epoch", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.uniform_below(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> views;
      std::vector<int> labels;
      for (std::size_t i = start; i < stop; ++i) {
        const auto* rec = records[order[i]];
        Rng view_rng = epoch_rng.substream("view", i);
        views.push_back(aug::augment_view(store.get(*rec), aug_cfg, view_rng));
        labels.push_back(*rec->class_label);
      }
      const Tensor batch = to_batch(views);
      Tensor features = encoder.forward(batch, train_backbone);
      Tensor logits = result.head.forward(features, true);
      Tensor dlogits(logits.shape);
      loss_sum += cross_entropy_grad(logits, labels, dlogits);
      ++batches;

      head_opt.zero_grad();
      if (train_backbone) encoder.zero_grad();
      const Tensor dfeatures = result.head.backward(dlogits);
      head_opt.step(cfg.head_lr);
      if (train_backbone) {
        encoder.backward(dfeatures);
        backbone_opt->step(cfg.backbone_lr);
      }
    }

    const EvalMetrics metrics = evaluate_classifier(encoder, result.head, val,
                                                    store, out_size, cfg.batch_size);
    result.history.push_back({epoch, loss_sum / static_cast<double>(batches),
                              metrics.top1, metrics.macro_f1});
  }
  return result;
}

}  // namespace

EvalMetrics evaluate_classifier(moco::Encoder& encoder, nn::Linear& head,
                                const data::Manifest& manifest,
                                data::ImageStore& store, int output_size,
                                int batch_size) {
  const auto records = labeled_records(manifest, "evaluate");
  if (records.empty()) throw ContractError("evaluate: empty manifest");
  std::vector<int> predictions, labels;
  predictions.reserve(records.size());
  labels.reserve(records.size());
  for (std::size_t start = 0; start < records.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(records.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Image> views;
    for (std::size_t i = start; i < stop; ++i)
      views.push_back(aug::eval_view(store.get(*records[i]), output_size));
    const Tensor features = encoder.forward(to_batch(views), false);
    const Tensor logits = head.forward(features, false);
    for (int b = 0; b < logits.dim(0); ++b) {
      int arg = 0;
      for (int j = 1; j < logits.dim(1); ++j)
        if (logits.at(b, j) > logits.at(b, arg)) arg = j;
      predictions.push_back(arg);
      labels.push_back(*records[start + static_cast<std::size_t>(b)]->class_label);
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  EvalMetrics m;
  m.top1 = static_cast<double>(correct) / static_cast<double>(labels.size());
  m.macro_f1 = macro_f1(predictions, labels,
                        static_cast<int>(manifest.class_vocabulary.size()));
  return m;
}

ProbeResult linear_probe(moco::Encoder& encoder, const data::Manifest& train,
                         const data::Manifest& val, data::ImageStore& store,
                         const aug::AugmentationConfig& aug_cfg,
                         const ProbeConfig& cfg, std::uint64_t seed) {
  if (cfg.mode != ProbeMode::kFrozen)
    throw ContractError("linear_probe: config mode must be frozen");
  return train_classifier(encoder, train, val, store, crop_only(aug_cfg), cfg,
                          seed, /*train_backbone=*/false);
}

ProbeResult finetune(moco::Encoder& encoder, const data::Manifest& train,
                     const data::Manifest& val, data::ImageStore& store,
                     const aug::AugmentationConfig& aug_cfg,
                     const ProbeConfig& cfg, std::uint64_t seed) {
  if (cfg.mode != ProbeMode::kFinetune)
    throw ContractError("finetune: config mode must be finetune");
  return train_classifier(encoder, train, val, store, aug_cfg, cfg, seed,
                          /*train_backbone=*/true);
}

SuiteReport run_label_efficiency_suite(
    moco::Encoder& encoder, const data::Manifest& train,
    const data::Manifest& val, data::ImageStore& store,
    const aug::AugmentationConfig& aug_cfg, const std::vector<double>& fractions,
    int replicates, const ProbeConfig& base_cfg, std::uint64_t seed) {
  if (replicates < 1) throw ContractError("suite: replicates must be positive");
  Rng root(seed);
  SuiteReport report;

  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double fraction = fractions[fi];
    const int reps = fraction >= 1.0 ? 1 : replicates;
    std::vector<std::vector<double>> per_mode(2);
    for (int rep = 0; rep < reps; ++rep) {
      Rng subset_rng = root.substream("subset", fi).substream(
          static_cast<std::uint64_t>(rep));
      const data::Manifest subset =
          fraction >= 1.0 ? train
                          : data::stratified_label_subset(train, fraction, subset_rng);
      const std::uint64_t run_seed =
          root.substream("probe_run", fi).substream(static_cast<std::uint64_t>(rep))
              .root_seed();

      for (ProbeMode mode : {ProbeMode::kFrozen, ProbeMode::kFinetune}) {
        ProbeConfig cfg = base_cfg;
        cfg.mode = mode;
        cfg.label_fraction = fraction;
        cfg.weight_decay = mode == ProbeMode::kFrozen ? 0.0
                                                      : finetune_defaults().weight_decay;
        ProbeResult res =
            mode == ProbeMode::kFrozen
                ? linear_probe(encoder, subset, val, store, aug_cfg, cfg, run_seed)
                : [&] {
                    // Finetuning must not contaminate the shared encoder.
                    moco::Encoder copy(encoder.config(), Rng(0));
                    copy.copy_params_from(encoder);
                    return finetune(copy, subset, val, store, aug_cfg, cfg, run_seed);
                  }();
        per_mode[mode == ProbeMode::kFrozen ? 0 : 1].push_back(
            select_best_epoch(res.history).val_macro_f1);
      }
    }
    for (ProbeMode mode : {ProbeMode::kFrozen, ProbeMode::kFinetune}) {
      const auto& scores = per_mode[mode == ProbeMode::kFrozen ? 0 : 1];
      SuiteCell cell;
      cell.fraction = fraction;
      cell.mode = mode;
      cell.per_replicate = scores;
      cell.mean_f1 = std::accumulate(scores.begin(), scores.end(), 0.0) /
                     static_cast<double>(scores.size());
      if (scores.size() > 1) {
        double ss = 0.0;
        for (double s : scores) ss += (s - cell.mean_f1) * (s - cell.mean_f1);
        cell.sd_f1 = std::sqrt(ss / static_cast<double>(scores.size() - 1));
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace mocotp::probe
