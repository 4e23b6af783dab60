#pragma once

#include <vector>

#include "mocotp/nn.hpp"
#include "mocotp/rng.hpp"
#include "mocotp/tensor.hpp"

namespace mocotp::moco {

// Desk-scale convolutional encoder: four conv stages (3x3, stride 1, 2x2
// average pool) followed by global pooling and a 2-layer projection head.
// Output embeddings are L2-normalized.
struct EncoderConfig {
  int input_size = 32;
  std::vector<int> stage_channels{16, 32, 64, 64};
  int proj_hidden = 64;
  int embedding_dim = 64;

  bool operator==(const EncoderConfig&) const = default;
};

void validate(const EncoderConfig& cfg);

class Encoder {
 public:
  Encoder(EncoderConfig cfg, Rng init_rng);

  // images: (N, 3, S, S) -> unit-norm embeddings (N, d).
  Tensor forward(const Tensor& images, bool train);
  // grad_embeddings: (N, d); accumulates into parameter grads.
  void backward(const Tensor& grad_embeddings);

  std::vector<nn::Param*> params() { return net_.params(); }
  std::vector<nn::Param*> buffers() { return net_.buffers(); }
  const EncoderConfig& config() const { return cfg_; }

  // Copies parameter and buffer values (not grads) from a same-shaped encoder.
  void copy_params_from(const Encoder& other);
  void zero_grad();

 private:
  EncoderConfig cfg_;
  nn::Sequential net_;
};

// Query encoder plus its momentum (key) twin. The key encoder is only ever
// written by ema_update / copy, never by gradients.
struct EncoderState {
  Encoder query;
  Encoder key;

  EncoderState(const EncoderConfig& cfg, Rng init_rng);
};

// theta_k <- m * theta_k + (1 - m) * theta_q, elementwise.
void ema_update(EncoderState& state, double m_ema);

}  // namespace mocotp::moco
