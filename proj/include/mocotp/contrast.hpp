#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mocotp/augment.hpp"
#include "mocotp/data.hpp"
#include "mocotp/encoder.hpp"

namespace mocotp::moco {

// Fixed-capacity FIFO of unit-norm key embeddings, each tagged with the
// location-group identity of the sample that produced it. The tags are what
// false-negative masking keys on.
class MemoryQueue {
 public:
  MemoryQueue(int capacity, int dim);

  // Overwrites batch-size slots starting at the write pointer (wrapping);
  // evicted entries are exactly the oldest ones.
  void enqueue(const Tensor& keys, const std::vector<std::string>& group_ids);

  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int fill_count() const { return fill_; }
  int write_pointer() const { return write_ptr_; }
  std::span<const float> key(int i) const;
  const std::string& group_id(int i) const { return group_ids_[static_cast<std::size_t>(i)]; }

 private:
  int capacity_;
  int dim_;
  int write_ptr_ = 0;
  int fill_ = 0;
  std::vector<float> keys_;
  std::vector<std::string> group_ids_;
};

// InfoNCE: -log( exp(q.k+ / tau) / (exp(q.k+ / tau) + sum_i exp(q.k-_i / tau)) ),
// evaluated with a max-subtracted log-sum-exp.
double info_nce(std::span<const double> q, std::span<const double> k_plus,
                const std::vector<std::vector<double>>& negatives, double tau);

// Same value; additionally writes dLoss/dq.
double info_nce_grad(std::span<const double> q, std::span<const double> k_plus,
                     const std::vector<std::vector<double>>& negatives,
                     double tau, std::span<double> dq);

// InfoNCE over the queue's filled entries, excluding every entry whose
// group_id equals q_group (those are temporal views of q, not negatives).
double masked_info_nce(std::span<const double> q, const std::string& q_group,
                       std::span<const double> k_plus, const MemoryQueue& queue,
                       double tau);

double masked_info_nce_grad(std::span<const double> q, const std::string& q_group,
                            std::span<const double> k_plus,
                            const MemoryQueue& queue, double tau,
                            std::span<double> dq);

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr);

struct ContrastiveConfig {
  double temperature = 0.2;
  int queue_capacity = 65536;
  double ema_momentum = 0.999;
  double base_lr = 3e-2;
  std::string schedule = "cosine";
  int batch_size = 256;
  double optimizer_momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 200;
  int embedding_dim = 64;
  // Also use the temporal partner as a query against its own key. Off by
  // default: the reference method is single-direction.
  bool symmetric_loss = false;
};

void validate(const ContrastiveConfig& cfg);

struct TrainLogEntry {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  int queue_fill = 0;
};

struct PretrainResult {
  EncoderState state;
  std::vector<TrainLogEntry> log;
};

// Full MoCoTP loop: temporal-pair batches, two augmented views, query
// forward with gradients, momentum-encoder keys without, masked InfoNCE
// against the queue, SGD with cosine schedule, EMA update, enqueue.
// Single-threaded and deterministic in `seed`.
PretrainResult pretrain(const data::Manifest& manifest, data::ImageStore& store,
                        const ContrastiveConfig& cfg,
                        const EncoderConfig& encoder_cfg,
                        const aug::AugmentationConfig& aug_cfg,
                        std::uint64_t seed);

struct Checkpoint {
  EncoderState state;
  EncoderConfig encoder_config;
  ContrastiveConfig contrastive_config;
  aug::AugmentationConfig aug_config;
};

// Versioned binary container: little-endian float32 payloads keyed by
// parameter name, plus the embedded JSON configs.
void checkpoint_save(const std::string& path, EncoderState& state,
                     const ContrastiveConfig& cfg,
                     const aug::AugmentationConfig& aug_cfg);
Checkpoint checkpoint_load(const std::string& path);

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path);
std::vector<TrainLogEntry> load_train_log(const std::string& path);

}  // namespace mocotp::moco
