#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mocotp/augment.hpp"
#include "mocotp/data.hpp"
#include "mocotp/encoder.hpp"
#include "mocotp/nn.hpp"

namespace mocotp::probe {

enum class ProbeMode { kFrozen, kFinetune };

std::string to_string(ProbeMode mode);
ProbeMode probe_mode_from_string(const std::string& s);

struct ProbeConfig {
  ProbeMode mode = ProbeMode::kFrozen;
  double head_lr = 1.0;
  double backbone_lr = 3e-4;  // finetune only
  double weight_decay = 0.0;  // frozen: 0, finetune: 1e-4
  double optimizer_momentum = 0.9;
  int epochs = 30;
  int batch_size = 64;
  double label_fraction = 1.0;
};

ProbeConfig frozen_defaults();
ProbeConfig finetune_defaults();
void validate(const ProbeConfig& cfg);

// One-vs-rest F1 averaged over all C classes. Classes with zero true and
// zero predicted instances contribute 0 to the mean.
double macro_f1(const std::vector<int>& predictions,
                const std::vector<int>& labels, int num_classes);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_macro_f1 = 0.0;
};

// Record with the highest val_top1; ties break toward the earliest epoch.
EpochRecord select_best_epoch(const std::vector<EpochRecord>& history);

struct ProbeResult {
  nn::Linear head;
  std::vector<EpochRecord> history;
};

struct EvalMetrics {
  double top1 = 0.0;
  double macro_f1 = 0.0;
};

// Deterministic evaluation of encoder+head on a labeled manifest.
EvalMetrics evaluate_classifier(moco::Encoder& encoder, nn::Linear& head,
                                const data::Manifest& manifest,
                                data::ImageStore& store, int output_size,
                                int batch_size);

// Trains only a linear head on frozen encoder outputs; augmentation is
// random resized cropping alone. The encoder is untouched, bit for bit.
ProbeResult linear_probe(moco::Encoder& encoder, const data::Manifest& train,
                         const data::Manifest& val, data::ImageStore& store,
                         const aug::AugmentationConfig& aug_cfg,
                         const ProbeConfig& cfg, std::uint64_t seed);

// Updates all parameters: encoder at backbone_lr, head at head_lr, with the
// pretraining augmentations. The encoder is modified in place.
ProbeResult finetune(moco::Encoder& encoder, const data::Manifest& train,
                     const data::Manifest& val, data::ImageStore& store,
                     const aug::AugmentationConfig& aug_cfg,
                     const ProbeConfig& cfg, std::uint64_t seed);

struct SuiteCell {
  double fraction = 1.0;
  ProbeMode mode = ProbeMode::kFrozen;
  double mean_f1 = 0.0;
  double sd_f1 = 0.0;
  std::vector<double> per_replicate;
};

struct SuiteReport {
  std::vector<SuiteCell> cells;  // fraction-major, frozen before finetune
};

// The label-efficiency protocol: for each fraction below 1.0 draws
// `replicates` independent stratified subsets, runs both probe modes, and
// reports mean/sd of best-epoch macro-F1 per cell. Fraction 1.0 runs once.
SuiteReport run_label_efficiency_suite(
    moco::Encoder& encoder, const data::Manifest& train,
    const data::Manifest& val, data::ImageStore& store,
    const aug::AugmentationConfig& aug_cfg, const std::vector<double>& fractions,
    int replicates, const ProbeConfig& base_cfg, std::uint64_t seed);

}  // namespace mocotp::probe
