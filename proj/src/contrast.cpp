#include "mocotp/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mocotp/error.hpp"
#include "mocotp/serialize.hpp"

namespace mocotp::moco {

using json = nlohmann::json;

MemoryQueue::MemoryQueue(int capacity, int dim) : capacity_(capacity), dim_(dim) {
  if (capacity < 1 || dim < 1) throw ContractError("MemoryQueue: bad capacity/dim");
  keys_.assign(static_cast<std::size_t>(capacity) * dim, 0.0f);
  group_ids_.assign(static_cast<std::size_t>(capacity), {});
}

std::span<const float> MemoryQueue::key(int i) const {
  return {keys_.data() + static_cast<std::size_t>(i) * dim_,
          static_cast<std::size_t>(dim_)};
}

void MemoryQueue::enqueue(const Tensor& keys,
                          const std::vector<std::string>& group_ids) {
  if (keys.ndim() != 2 || keys.dim(1) != dim_)
    throw ContractError("enqueue: key batch must be (B, dim)");
  const int batch = keys.dim(0);
  if (batch > capacity_)
    throw ContractError("enqueue: batch larger than queue capacity");
  if (group_ids.size() != static_cast<std::size_t>(batch))
    throw ContractError("enqueue: one group_id per key required");
  for (int i = 0; i < batch; ++i) {
    double sq = 0.0;
    for (int j = 0; j < dim_; ++j)
      sq += static_cast<double>(keys.at(i, j)) * keys.at(i, j);
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-4)
      throw ContractError("enqueue: keys must be unit-norm");
  }
  for (int i = 0; i < batch; ++i) {
    const int slot = (write_ptr_ + i) % capacity_;
    std::copy_n(keys.data.data() + static_cast<std::size_t>(i) * dim_, dim_,
                keys_.data() + static_cast<std::size_t>(slot) * dim_);
    group_ids_[static_cast<std::size_t>(slot)] = group_ids[static_cast<std::size_t>(i)];
  }
  write_ptr_ = (write_ptr_ + batch) % capacity_;
  fill_ = std::min(fill_ + batch, capacity_);
}

namespace {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot_f(std::span<const double> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<double>(b[i]);
  return s;
}

// Shared core: positive logit + arbitrary negative logits -> loss and
// softmax weights (weights[0] belongs to the positive).
double nce_core(double pos_logit, const std::vector<double>& neg_logits,
                std::vector<double>* weights) {
  double max_logit = pos_logit;
  for (double l : neg_logits) max_logit = std::max(max_logit, l);
  double denom = std::exp(pos_logit - max_logit);
  for (double l : neg_logits) denom += std::exp(l - max_logit);
  const double loss = -(pos_logit - max_logit) + std::log(denom);
  if (weights) {
    weights->clear();
    weights->push_back(std::exp(pos_logit - max_logit) / denom);
    for (double l : neg_logits) weights->push_back(std::exp(l - max_logit) / denom);
  }
  return loss;
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
}

}  // namespace

double info_nce(std::span<const double> q, std::span<const double> k_plus,
                const std::vector<std::vector<double>>& negatives, double tau) {
  check_tau(tau);
  std::vector<double> neg_logits;
  neg_logits.reserve(negatives.size());
  for (const auto& k : negatives) neg_logits.push_back(dot(q, k) / tau);
  return nce_core(dot(q, k_plus) / tau, neg_logits, nullptr);
}

double info_nce_grad(std::span<const double> q, std::span<const double> k_plus,
                     const std::vector<std::vector<double>>& negatives,
                     double tau, std::span<double> dq) {
  check_tau(tau);
  if (dq.size() != q.size()) throw ContractError("info_nce_grad: dq size mismatch");
  std::vector<double> neg_logits;
  neg_logits.reserve(negatives.size());
  for (const auto& k : negatives) neg_logits.push_back(dot(q, k) / tau);
  std::vector<double> weights;
  const double loss = nce_core(dot(q, k_plus) / tau, neg_logits, &weights);

  // dL/dq = (sum_j p_j k_j - k+) / tau, positive included in the sum.
  for (std::size_t i = 0; i < dq.size(); ++i)
    dq[i] = (weights[0] - 1.0) * k_plus[i] / tau;
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    const double w = weights[n + 1] / tau;
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] += w * negatives[n][i];
  }
  return loss;
}

double masked_info_nce(std::span<const double> q, const std::string& q_group,
                       std::span<const double> k_plus, const MemoryQueue& queue,
                       double tau) {
  check_tau(tau);
  std::vector<double> neg_logits;
  neg_logits.reserve(static_cast<std::size_t>(queue.fill_count()));
  for (int i = 0; i < queue.fill_count(); ++i) {
    if (queue.group_id(i) == q_group) continue;
    neg_logits.push_back(dot_f(q, queue.key(i)) / tau);
  }
  return nce_core(dot(q, k_plus) / tau, neg_logits, nullptr);
}

double masked_info_nce_grad(std::span<const double> q, const std::string& q_group,
                            std::span<const double> k_plus,
                            const MemoryQueue& queue, double tau,
                            std::span<double> dq) {
  check_tau(tau);
  if (dq.size() != q.size())
    throw ContractError("masked_info_nce_grad: dq size mismatch");
  std::vector<int> kept;
  std::vector<double> neg_logits;
  kept.reserve(static_cast<std::size_t>(queue.fill_count()));
  for (int i = 0; i < queue.fill_count(); ++i) {
    if (queue.group_id(i) == q_group) continue;
    kept.push_back(i);
    neg_logits.push_back(dot_f(q, queue.key(i)) / tau);
  }
  std::vector<double> weights;
  const double loss = nce_core(dot(q, k_plus) / tau, neg_logits, &weights);

  for (std::size_t i = 0; i < dq.size(); ++i)
    dq[i] = (weights[0] - 1.0) * k_plus[i] / tau;
  for (std::size_t n = 0; n < kept.size(); ++n) {
    const double w = weights[n + 1] / tau;
    const auto key = queue.key(kept[n]);
    for (std::size_t i = 0; i < dq.size(); ++i)
      dq[i] += w * static_cast<double>(key[i]);
  }
  return loss;
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr) {
  if (total_steps <= 0) throw ContractError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ContractError("cosine_lr: step out of range");
  return base_lr * 0.5 *
         (1.0 + std::cos(M_PI * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

void validate(const ContrastiveConfig& cfg) {
  if (!(cfg.temperature > 0.0))
    throw ContractError("ContrastiveConfig: temperature must be positive");
  // 1.0 is admitted for frozen-dynamics tests; real runs live in [0, 1).
  if (cfg.ema_momentum < 0.0 || cfg.ema_momentum > 1.0)
    throw ContractError("ContrastiveConfig: ema_momentum must be in [0,1]");
  if (cfg.queue_capacity < 1 || cfg.batch_size < 1)
    throw ContractError("ContrastiveConfig: queue/batch sizes must be positive");
  if (cfg.queue_capacity % cfg.batch_size != 0)
    throw ContractError(
        "ContrastiveConfig: queue_capacity must be a multiple of batch_size");
  if (cfg.epochs < 1) throw ContractError("ContrastiveConfig: epochs must be positive");
  if (cfg.embedding_dim < 1)
    throw ContractError("ContrastiveConfig: embedding_dim must be positive");
  if (cfg.schedule != "cosine")
    throw ContractError("ContrastiveConfig: unknown schedule '" + cfg.schedule + "'");
}

namespace {

struct SampleRef {
  std::size_t group_index;
  std::size_t record_index;
};

// One training direction: queries through the grad encoder, keys through the
// momentum encoder, masked loss against the queue. Returns summed loss and
// leaves parameter grads accumulated. `scale` weights the gradient (0.5 for
// each direction of the symmetric variant).
double loss_and_backward(EncoderState& state, MemoryQueue& queue,
                         const ContrastiveConfig& cfg, const Tensor& views_q,
                         const Tensor& views_k,
                         const std::vector<std::string>& group_ids, double scale,
                         Tensor* keys_out) {
  Tensor q = state.query.forward(views_q, true);
  // Keys run with batch-statistic normalization, the MoCo convention (the
  // shuffling-BN trick is omitted at desk scale). No gradients ever flow
  // here: backward is simply never called on the key encoder.
  Tensor k = state.key.forward(views_k, true);
  const int batch = q.dim(0);
  const int d = q.dim(1);

  Tensor dq_batch({batch, d});
  std::vector<double> q_row(static_cast<std::size_t>(d));
  std::vector<double> k_row(static_cast<std::size_t>(d));
  std::vector<double> dq_row(static_cast<std::size_t>(d));
  double loss_sum = 0.0;
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < d; ++j) {
      q_row[static_cast<std::size_t>(j)] = q.at(b, j);
      k_row[static_cast<std::size_t>(j)] = k.at(b, j);
    }
    loss_sum += masked_info_nce_grad(q_row, group_ids[static_cast<std::size_t>(b)],
                                     k_row, queue, cfg.temperature, dq_row);
    const double w = scale / batch;
    for (int j = 0; j < d; ++j)
      dq_batch.at(b, j) = static_cast<float>(dq_row[static_cast<std::size_t>(j)] * w);
  }
  state.query.backward(dq_batch);
  if (keys_out) *keys_out = std::move(k);
  return loss_sum;
}

}  // namespace

PretrainResult pretrain(const data::Manifest& manifest, data::ImageStore& store,
                        const ContrastiveConfig& cfg,
                        const EncoderConfig& encoder_cfg,
                        const aug::AugmentationConfig& aug_cfg,
                        std::uint64_t seed) {
  validate(cfg);
  validate(encoder_cfg);
  aug::validate(aug_cfg);
  if (cfg.embedding_dim != encoder_cfg.embedding_dim)
    throw ContractError("pretrain: embedding_dim disagrees between configs");
  if (manifest.groups.empty()) throw ContractError("pretrain: empty manifest");

  std::vector<SampleRef> samples;
  for (std::size_t gi = 0; gi < manifest.groups.size(); ++gi)
    for (std::size_t ri = 0; ri < manifest.groups[gi].records.size(); ++ri)
      samples.push_back({gi, ri});
  const std::size_t steps_per_epoch = samples.size() / static_cast<std::size_t>(cfg.batch_size);
  if (steps_per_epoch == 0)
    throw ValidationError("pretrain: batch_size exceeds the number of records");
  const std::int64_t total_steps =
      static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;

  Rng root(seed);
  EncoderState state(encoder_cfg, root.substream("init"));
  MemoryQueue queue(cfg.queue_capacity, cfg.embedding_dim);
  nn::SgdOptimizer opt(state.query.params(), cfg.optimizer_momentum,
                       cfg.weight_decay);

  PretrainResult result{std::move(state), {}};
  EncoderState& st = result.state;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t global_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = root.substream("epoch", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[epoch_rng.uniform_below(i)]);

    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t base = step * static_cast<std::size_t>(cfg.batch_size);
      std::vector<Image> q_views, k_views;
      std::vector<std::string> group_ids;
      q_views.reserve(static_cast<std::size_t>(cfg.batch_size));
      k_views.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t ordinal = base + static_cast<std::size_t>(b);
        const SampleRef ref = samples[order[ordinal]];
        const auto& group = manifest.groups[ref.group_index];
        Rng pair_rng = root.substream("pair", static_cast<std::uint64_t>(epoch))
                           .substream(ordinal);
        const data::ImageRecord partner =
            data::sample_temporal_partner(group, ref.record_index, pair_rng);
        const Rng sample_rng =
            root.substream("aug", static_cast<std::uint64_t>(epoch)).substream(ordinal);
        auto [vq, vk] = aug::make_query_key_views(
            group.records[ref.record_index], partner, store, aug_cfg, sample_rng);
        q_views.push_back(std::move(vq));
        k_views.push_back(std::move(vk));
        group_ids.push_back(group.location_id);
      }
      const Tensor batch_q = to_batch(q_views);
      const Tensor batch_k = to_batch(k_views);

      st.query.zero_grad();
      Tensor keys;
      double loss_sum;
      if (cfg.symmetric_loss) {
        loss_sum = loss_and_backward(st, queue, cfg, batch_q, batch_k, group_ids,
                                     0.5, &keys);
        loss_sum += loss_and_backward(st, queue, cfg, batch_k, batch_q, group_ids,
                                      0.5, nullptr);
        loss_sum *= 0.5;
      } else {
        loss_sum = loss_and_backward(st, queue, cfg, batch_q, batch_k, group_ids,
                                     1.0, &keys);
      }
      last_lr = cosine_lr(global_step, total_steps, cfg.base_lr);
      opt.step(last_lr);
      ema_update(st, cfg.ema_momentum);
      queue.enqueue(keys, group_ids);

      epoch_loss += loss_sum / cfg.batch_size;
      ++global_step;
    }
    result.log.push_back({epoch, epoch_loss / static_cast<double>(steps_per_epoch),
                          last_lr, queue.fill_count()});
  }
  return result;
}

// ---- checkpoint container ----

namespace {

constexpr char kMagic[4] = {'M', 'C', 'T', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kSentinel = 0xE0F0E0F0u;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("checkpoint truncated");
  return v;
}

void write_named_params(std::ofstream& out, const std::string& prefix,
                        const std::vector<nn::Param*>& params) {
  for (const nn::Param* p : params) {
    const std::string name = prefix + p->name;
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) write_pod(out, static_cast<std::uint32_t>(d));
    write_pod(out, static_cast<std::uint64_t>(p->value.data.size()));
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(float)));
  }
}

}  // namespace

void checkpoint_save(const std::string& path, EncoderState& state,
                     const ContrastiveConfig& cfg,
                     const aug::AugmentationConfig& aug_cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);

  json meta;
  meta["contrastive"] = cfg;
  meta["encoder"] = state.query.config();
  meta["augmentation"] = aug_cfg;
  const std::string meta_str = meta.dump();

  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  const auto qp = state.query.params();
  const auto qb = state.query.buffers();
  const auto kp = state.key.params();
  const auto kb = state.key.buffers();
  write_pod(out, static_cast<std::uint32_t>(qp.size() + qb.size() + kp.size() +
                                            kb.size()));
  write_named_params(out, "query.", qp);
  write_named_params(out, "query.", qb);
  write_named_params(out, "key.", kp);
  write_named_params(out, "key.", kb);
  write_pod(out, kSentinel);
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a checkpoint file: " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw FormatError("incompatible checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + ")");

  const auto meta_len = read_pod<std::uint64_t>(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw FormatError("checkpoint truncated");
  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata unparseable: ") + e.what());
  }
  const auto encoder_cfg = meta.at("encoder").get<EncoderConfig>();
  const auto contrastive_cfg = meta.at("contrastive").get<ContrastiveConfig>();
  const auto aug_cfg = meta.at("augmentation").get<aug::AugmentationConfig>();

  Checkpoint ckpt{EncoderState(encoder_cfg, Rng(0)), encoder_cfg,
                  contrastive_cfg, aug_cfg};
  std::unordered_map<std::string, nn::Param*> by_name;
  for (nn::Param* p : ckpt.state.query.params()) by_name["query." + p->name] = p;
  for (nn::Param* p : ckpt.state.query.buffers()) by_name["query." + p->name] = p;
  for (nn::Param* p : ckpt.state.key.params()) by_name["key." + p->name] = p;
  for (nn::Param* p : ckpt.state.key.buffers()) by_name["key." + p->name] = p;

  const auto count = read_pod<std::uint32_t>(in);
  if (count != by_name.size())
    throw FormatError("checkpoint parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError("checkpoint truncated");
    const auto it = by_name.find(name);
    if (it == by_name.end())
      throw FormatError("checkpoint holds unknown parameter '" + name + "'");
    nn::Param* p = it->second;
    const auto ndim = read_pod<std::uint32_t>(in);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::uint32_t>(in));
    if (shape != p->value.shape)
      throw FormatError("checkpoint shape mismatch for '" + name + "'");
    const auto numel = read_pod<std::uint64_t>(in);
    if (numel != p->value.data.size())
      throw FormatError("checkpoint payload size mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(p->value.data.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (!in) throw FormatError("checkpoint truncated");
  }
  if (read_pod<std::uint32_t>(in) != kSentinel)
    throw FormatError("checkpoint sentinel missing (file corrupt or truncated)");
  return ckpt;
}

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write train log: " + path);
  for (const auto& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["mean_loss"] = e.mean_loss;
    j["lr"] = e.lr;
    j["queue_fill"] = e.queue_fill;
    out << j.dump() << "\n";
  }
}

std::vector<TrainLogEntry> load_train_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open train log: " + path);
  std::vector<TrainLogEntry> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      log.push_back({j.at("epoch").get<int>(), j.at("mean_loss").get<double>(),
                     j.at("lr").get<double>(), j.at("queue_fill").get<int>()});
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad train log line: ") + e.what(), line_no);
    }
  }
  return log;
}

}  // namespace mocotp::moco
