#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mocotp/rng.hpp"
#include "mocotp/tensor.hpp"

namespace mocotp::nn {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, std::vector<int> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

// Training layer with cached activations. forward(x, train=true) stores
// whatever backward needs (and, for batch norm, uses batch statistics);
// backward accumulates into param grads and returns the gradient with
// respect to the layer input. buffers() exposes non-learnable state such as
// running statistics: saved in checkpoints, never touched by optimizers.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<Param*> buffers() { return {}; }
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, int pad);
  void init_he(Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  Param weight_;  // (out, in, k, k)
  Param bias_;    // (out)
  std::vector<int> in_shape_;
  std::vector<float> cols_;  // im2col cache, (in*k*k) x (N*OH*OW) column-major
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<bool> active_;
};

// Per-channel batch normalization over (N, H, W). Training mode normalizes
// with batch statistics and updates the running buffers; eval mode uses the
// buffers. The running variance is stored unbiased.
class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(std::string name, int channels, double momentum = 0.1,
              double eps = 1e-5);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param*> buffers() override { return {&running_mean_, &running_var_}; }

 private:
  int channels_;
  double momentum_, eps_;
  Param gamma_, beta_;
  Param running_mean_, running_var_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

// 2x2 average pooling with stride 2; spatial dims must be even.
class AvgPool2 final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> in_shape_;
};

class Linear final : public Layer {
 public:
  Linear(std::string name, int in_dim, int out_dim);
  void init_he(Rng& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_dim_, out_dim_;
  Param weight_;  // (out, in)
  Param bias_;    // (out)
  Tensor input_cache_;
};

// Row-wise L2 normalization of an (N, D) batch.
class L2Normalize final : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor output_cache_;
  std::vector<float> norms_;
};

class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
  std::vector<Param*> params();
  std::vector<Param*> buffers();

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// SGD with classic momentum; weight decay is added to the gradient.
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Param*> params, double momentum, double weight_decay);
  void step(double lr);
  void zero_grad();

 private:
  struct Slot {
    Param* param;
    Tensor velocity;
  };
  std::vector<Slot> slots_;
  double momentum_;
  double weight_decay_;
};

void zero_grads(const std::vector<Param*>& params);

}  // namespace mocotp::nn
