#include "mocotp/nn.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "mocotp/error.hpp"

namespace mocotp::nn {

namespace {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;
using MatrixCM = Eigen::MatrixXf;
using MapCM = Eigen::Map<MatrixCM>;
using ConstMapCM = Eigen::Map<const MatrixCM>;

}  // namespace

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad),
      weight_(name + ".weight", {out_ch, in_ch, ksize, ksize}),
      bias_(name + ".bias", {out_ch}) {
  if (in_ch < 1 || out_ch < 1 || ksize < 1 || stride < 1 || pad < 0)
    throw ContractError("Conv2d: bad configuration");
}

void Conv2d::init_he(Rng& rng) {
  const double fan_in = static_cast<double>(in_ch_) * k_ * k_;
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (auto& w : weight_.value.data)
    w = static_cast<float>(std_dev * rng.normal());
  weight_.grad.fill(0.0f);
  bias_.value.fill(0.0f);
  bias_.grad.fill(0.0f);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_)
    throw ContractError("Conv2d: input shape mismatch");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
  if (oh < 1 || ow < 1) throw ContractError("Conv2d: input smaller than kernel");

  const std::size_t rows = static_cast<std::size_t>(in_ch_) * k_ * k_;
  const std::size_t ncols = static_cast<std::size_t>(n) * oh * ow;
  cols_.assign(rows * ncols, 0.0f);

  // im2col, column index = (b * OH + oy) * OW + ox.
  for (int b = 0; b < n; ++b)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const std::size_t col = (static_cast<std::size_t>(b) * oh + oy) * ow + ox;
        float* dst = cols_.data() + col * rows;
        std::size_t r = 0;
        for (int c = 0; c < in_ch_; ++c)
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_;
            for (int kx = 0; kx < k_; ++kx, ++r) {
              const int ix = ox * stride_ + kx - pad_;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                dst[r] = x.at(b, c, iy, ix);
            }
          }
      }

  ConstMapCM cols(cols_.data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(ncols));
  ConstMapRM wmat(weight_.value.data.data(), out_ch_, static_cast<Eigen::Index>(rows));
  MatrixCM out_mat = wmat * cols;  // out_ch x ncols

  Tensor out({n, out_ch_, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < out_ch_; ++o) {
      const float bias = bias_.value.at(o);
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          out.at(b, o, oy, ox) =
              out_mat(o, (static_cast<Eigen::Index>(b) * oh + oy) * ow + ox) + bias;
    }

  if (train)
    in_shape_ = x.shape;
  else
    cols_.clear();
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (in_shape_.empty()) throw ContractError("Conv2d: backward before forward");
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int oh = grad_out.dim(2), ow = grad_out.dim(3);
  const std::size_t rows = static_cast<std::size_t>(in_ch_) * k_ * k_;
  const std::size_t ncols = static_cast<std::size_t>(n) * oh * ow;

  MatrixCM gmat(out_ch_, static_cast<Eigen::Index>(ncols));
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < out_ch_; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          gmat(o, (static_cast<Eigen::Index>(b) * oh + oy) * ow + ox) =
              grad_out.at(b, o, oy, ox);

  ConstMapCM cols(cols_.data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(ncols));
  MapRM wgrad(weight_.grad.data.data(), out_ch_, static_cast<Eigen::Index>(rows));
  wgrad.noalias() += gmat * cols.transpose();
  for (int o = 0; o < out_ch_; ++o) bias_.grad.at(o) += gmat.row(o).sum();

  ConstMapRM wmat(weight_.value.data.data(), out_ch_, static_cast<Eigen::Index>(rows));
  MatrixCM dcols = wmat.transpose() * gmat;  // rows x ncols

  Tensor dx(in_shape_);
  for (int b = 0; b < n; ++b)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const std::size_t col = (static_cast<std::size_t>(b) * oh + oy) * ow + ox;
        std::size_t r = 0;
        for (int c = 0; c < in_ch_; ++c)
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ + ky - pad_;
            for (int kx = 0; kx < k_; ++kx, ++r) {
              const int ix = ox * stride_ + kx - pad_;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                dx.at(b, c, iy, ix) += dcols(static_cast<Eigen::Index>(r),
                                             static_cast<Eigen::Index>(col));
            }
          }
      }
  return dx;
}

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor out = x;
  if (train) active_.assign(x.data.size(), false);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > 0.0f) {
      if (train) active_[i] = true;
    } else {
      out.data[i] = 0.0f;
    }
  }
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (!active_[i]) dx.data[i] = 0.0f;
  return dx;
}

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}),
      running_mean_(name + ".running_mean", {channels}),
      running_var_(name + ".running_var", {channels}) {
  gamma_.value.fill(1.0f);
  running_var_.value.fill(1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(1) != channels_)
    throw ContractError("BatchNorm2d: input shape mismatch");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const double count = static_cast<double>(n) * h * w;
  Tensor out(x.shape);
  if (train) {
    xhat_ = Tensor(x.shape);
    inv_std_.resize(static_cast<std::size_t>(channels_));
  }
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (train) {
      double sum = 0.0;
      for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) sum += x.at(b, c, y, xx);
      mean = sum / count;
      double sq = 0.0;
      for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            const double d = x.at(b, c, y, xx) - mean;
            sq += d * d;
          }
      var = sq / count;  // biased, used for normalization
      const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
      running_mean_.value.at(c) = static_cast<float>(
          (1.0 - momentum_) * running_mean_.value.at(c) + momentum_ * mean);
      running_var_.value.at(c) = static_cast<float>(
          (1.0 - momentum_) * running_var_.value.at(c) + momentum_ * unbiased);
    } else {
      mean = running_mean_.value.at(c);
      var = running_var_.value.at(c);
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    const float g = gamma_.value.at(c);
    const float bta = beta_.value.at(c);
    const float mu = static_cast<float>(mean);
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const float normed = (x.at(b, c, y, xx) - mu) * inv;
          if (train) xhat_.at(b, c, y, xx) = normed;
          out.at(b, c, y, xx) = g * normed + bta;
        }
    if (train) inv_std_[static_cast<std::size_t>(c)] = inv;
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (xhat_.data.empty()) throw ContractError("BatchNorm2d: backward before forward");
  const int n = grad_out.dim(0), h = grad_out.dim(2), w = grad_out.dim(3);
  const double count = static_cast<double>(n) * h * w;
  Tensor dx(grad_out.shape);
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double dy = grad_out.at(b, c, y, xx);
          sum_dy += dy;
          sum_dy_xhat += dy * xhat_.at(b, c, y, xx);
        }
    gamma_.grad.at(c) += static_cast<float>(sum_dy_xhat);
    beta_.grad.at(c) += static_cast<float>(sum_dy);

    const double g = gamma_.value.at(c);
    const double inv = inv_std_[static_cast<std::size_t>(c)];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double dy = grad_out.at(b, c, y, xx);
          dx.at(b, c, y, xx) = static_cast<float>(
              g * inv * (dy - mean_dy - xhat_.at(b, c, y, xx) * mean_dy_xhat));
        }
  }
  return dx;
}

Tensor AvgPool2::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
    throw ContractError("AvgPool2: spatial dims must be even");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2) / 2, w = x.dim(3) / 2;
  Tensor out({n, c, h, w});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          out.at(b, ch, y, xx) =
              0.25f * (x.at(b, ch, 2 * y, 2 * xx) + x.at(b, ch, 2 * y, 2 * xx + 1) +
                       x.at(b, ch, 2 * y + 1, 2 * xx) + x.at(b, ch, 2 * y + 1, 2 * xx + 1));
  if (train) in_shape_ = x.shape;
  return out;
}

Tensor AvgPool2::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1];
  const int h = grad_out.dim(2), w = grad_out.dim(3);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const float g = 0.25f * grad_out.at(b, ch, y, xx);
          dx.at(b, ch, 2 * y, 2 * xx) = g;
          dx.at(b, ch, 2 * y, 2 * xx + 1) = g;
          dx.at(b, ch, 2 * y + 1, 2 * xx) = g;
          dx.at(b, ch, 2 * y + 1, 2 * xx + 1) = g;
        }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4) throw ContractError("GlobalAvgPool: expected NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const float inv = 1.0f / static_cast<float>(h * w);
  Tensor out({n, c});
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      float acc = 0.0f;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) acc += x.at(b, ch, y, xx);
      out.at(b, ch) = acc * inv;
    }
  if (train) in_shape_ = x.shape;
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const float g = grad_out.at(b, ch) * inv;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) dx.at(b, ch, y, xx) = g;
    }
  return dx;
}

Linear::Linear(std::string name, int in_dim, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim),
      weight_(name + ".weight", {out_dim, in_dim}),
      bias_(name + ".bias", {out_dim}) {}

void Linear::init_he(Rng& rng) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(in_dim_));
  for (auto& w : weight_.value.data)
    w = static_cast<float>(std_dev * rng.normal());
  weight_.grad.fill(0.0f);
  bias_.value.fill(0.0f);
  bias_.grad.fill(0.0f);
}

Tensor Linear::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2 || x.dim(1) != in_dim_)
    throw ContractError("Linear: input shape mismatch");
  const int n = x.dim(0);
  ConstMapRM xm(x.data.data(), n, in_dim_);
  ConstMapRM wm(weight_.value.data.data(), out_dim_, in_dim_);
  Tensor out({n, out_dim_});
  MapRM om(out.data.data(), n, out_dim_);
  om.noalias() = xm * wm.transpose();
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < out_dim_; ++o) out.at(b, o) += bias_.value.at(o);
  if (train) input_cache_ = x;
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = grad_out.dim(0);
  ConstMapRM gm(grad_out.data.data(), n, out_dim_);
  ConstMapRM xm(input_cache_.data.data(), n, in_dim_);
  MapRM wgrad(weight_.grad.data.data(), out_dim_, in_dim_);
  wgrad.noalias() += gm.transpose() * xm;
  for (int o = 0; o < out_dim_; ++o) bias_.grad.at(o) += gm.col(o).sum();

  ConstMapRM wm(weight_.value.data.data(), out_dim_, in_dim_);
  Tensor dx({n, in_dim_});
  MapRM dxm(dx.data.data(), n, in_dim_);
  dxm.noalias() = gm * wm;
  return dx;
}

Tensor L2Normalize::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2) throw ContractError("L2Normalize: expected (N, D)");
  const int n = x.dim(0), d = x.dim(1);
  Tensor out = x;
  norms_.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    double sq = 0.0;
    for (int j = 0; j < d; ++j) sq += static_cast<double>(x.at(b, j)) * x.at(b, j);
    const float norm = std::max(static_cast<float>(std::sqrt(sq)), 1e-12f);
    norms_[static_cast<std::size_t>(b)] = norm;
    for (int j = 0; j < d; ++j) out.at(b, j) /= norm;
  }
  if (train) output_cache_ = out;
  return out;
}

Tensor L2Normalize::backward(const Tensor& grad_out) {
  const int n = grad_out.dim(0), d = grad_out.dim(1);
  Tensor dx({n, d});
  for (int b = 0; b < n; ++b) {
    double dot = 0.0;
    for (int j = 0; j < d; ++j)
      dot += static_cast<double>(grad_out.at(b, j)) * output_cache_.at(b, j);
    const float norm = norms_[static_cast<std::size_t>(b)];
    for (int j = 0; j < d; ++j)
      dx.at(b, j) = (grad_out.at(b, j) -
                     static_cast<float>(dot) * output_cache_.at(b, j)) / norm;
  }
  return dx;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, train);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return g;
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<Param*> Sequential::buffers() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (Param* p : layer->buffers()) out.push_back(p);
  return out;
}

SgdOptimizer::SgdOptimizer(std::vector<Param*> params, double momentum,
                           double weight_decay)
    : momentum_(momentum), weight_decay_(weight_decay) {
  slots_.reserve(params.size());
  for (Param* p : params) slots_.push_back({p, Tensor(p->value.shape)});
}

void SgdOptimizer::step(double lr) {
  const float m = static_cast<float>(momentum_);
  const float wd = static_cast<float>(weight_decay_);
  const float eta = static_cast<float>(lr);
  for (auto& slot : slots_) {
    auto& value = slot.param->value.data;
    auto& grad = slot.param->grad.data;
    auto& vel = slot.velocity.data;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float g = grad[i] + wd * value[i];
      vel[i] = m * vel[i] + g;
      value[i] -= eta * vel[i];
    }
  }
}

void SgdOptimizer::zero_grad() {
  for (auto& slot : slots_) slot.param->grad.fill(0.0f);
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->grad.fill(0.0f);
}

}  // namespace mocotp::nn
