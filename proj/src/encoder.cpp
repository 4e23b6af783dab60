#include "mocotp/encoder.hpp"

#include <memory>

#include "mocotp/error.hpp"

namespace mocotp::moco {

void validate(const EncoderConfig& cfg) {
  if (cfg.stage_channels.empty())
    throw ContractError("EncoderConfig: need at least one stage");
  const int down = 1 << static_cast<int>(cfg.stage_channels.size());
  if (cfg.input_size < down || cfg.input_size % down != 0)
    throw ContractError("EncoderConfig: input_size must be a multiple of " +
                        std::to_string(down));
  if (cfg.proj_hidden < 1 || cfg.embedding_dim < 1)
    throw ContractError("EncoderConfig: projection dims must be positive");
  for (int c : cfg.stage_channels)
    if (c < 1) throw ContractError("EncoderConfig: stage channels must be positive");
}

Encoder::Encoder(EncoderConfig cfg, Rng init_rng) : cfg_(std::move(cfg)) {
  validate(cfg_);
  int in_ch = 3;
  for (std::size_t i = 0; i < cfg_.stage_channels.size(); ++i) {
    const int out_ch = cfg_.stage_channels[i];
    const std::string stage = "backbone.conv" + std::to_string(i + 1);
    auto conv = std::make_unique<nn::Conv2d>(stage, in_ch, out_ch, 3, 1, 1);
    conv->init_he(init_rng);
    net_.add(std::move(conv));
    net_.add(std::make_unique<nn::BatchNorm2d>(
        "backbone.bn" + std::to_string(i + 1), out_ch));
    net_.add(std::make_unique<nn::ReLU>());
    net_.add(std::make_unique<nn::AvgPool2>());
    in_ch = out_ch;
  }
  net_.add(std::make_unique<nn::GlobalAvgPool>());
  auto fc1 = std::make_unique<nn::Linear>("proj.fc1", in_ch, cfg_.proj_hidden);
  fc1->init_he(init_rng);
  net_.add(std::move(fc1));
  net_.add(std::make_unique<nn::ReLU>());
  auto fc2 = std::make_unique<nn::Linear>("proj.fc2", cfg_.proj_hidden,
                                          cfg_.embedding_dim);
  fc2->init_he(init_rng);
  net_.add(std::move(fc2));
  net_.add(std::make_unique<nn::L2Normalize>());
}

Tensor Encoder::forward(const Tensor& images, bool train) {
  if (images.ndim() != 4 || images.dim(1) != 3 ||
      images.dim(2) != cfg_.input_size || images.dim(3) != cfg_.input_size)
    throw ContractError("Encoder: expected (N, 3, " +
                        std::to_string(cfg_.input_size) + ", " +
                        std::to_string(cfg_.input_size) + ") input");
  return net_.forward(images, train);
}

void Encoder::backward(const Tensor& grad_embeddings) {
  net_.backward(grad_embeddings);
}

void Encoder::copy_params_from(const Encoder& other) {
  auto& mutable_other = const_cast<Encoder&>(other);
  for (auto [dst, src] : {std::pair{params(), mutable_other.params()},
                          std::pair{buffers(), mutable_other.buffers()}}) {
    if (dst.size() != src.size())
      throw ContractError("Encoder: parameter structure mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      require_same_shape(dst[i]->value, src[i]->value, "copy_params_from");
      dst[i]->value.data = src[i]->value.data;
    }
  }
}

void Encoder::zero_grad() { nn::zero_grads(params()); }

EncoderState::EncoderState(const EncoderConfig& cfg, Rng init_rng)
    : query(cfg, init_rng.substream("query_init")),
      key(cfg, init_rng.substream("key_init")) {
  // Standard MoCo start: the key encoder begins as an exact copy.
  key.copy_params_from(query);
}

void ema_update(EncoderState& state, double m_ema) {
  if (m_ema < 0.0 || m_ema > 1.0)
    throw ContractError("ema_update: momentum must be in [0,1]");
  auto qp = state.query.params();
  auto kp = state.key.params();
  const float m = static_cast<float>(m_ema);
  for (std::size_t i = 0; i < qp.size(); ++i) {
    require_same_shape(kp[i]->value, qp[i]->value, "ema_update");
    auto& kv = kp[i]->value.data;
    const auto& qv = qp[i]->value.data;
    for (std::size_t j = 0; j < kv.size(); ++j)
      kv[j] = m * kv[j] + (1.0f - m) * qv[j];
  }
}

}  // namespace mocotp::moco
