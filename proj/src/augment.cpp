#include "mocotp/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mocotp/error.hpp"

namespace mocotp::aug {

namespace {

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

inline float luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// Single counter-clockwise quarter turn: (y, x) -> (W-1-x, y).
Image rot90_once(const Image& img) {
  Image out(img.channels, img.width, img.height);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, img.width - 1 - x, y) = img.at(c, y, x);
  return out;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  v = mx;
  const float d = mx - mn;
  s = mx > 0.0f ? d / mx : 0.0f;
  if (d <= 0.0f) {
    h = 0.0f;
    return;
  }
  if (mx == r)
    h = (g - b) / d + (g < b ? 6.0f : 0.0f);
  else if (mx == g)
    h = (b - r) / d + 2.0f;
  else
    h = (r - g) / d + 4.0f;
  h /= 6.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = h - std::floor(h);
  const float i = std::floor(h * 6.0f);
  const float f = h * 6.0f - i;
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - f * s);
  const float t = v * (1.0f - (1.0f - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

void validate(const AugmentationConfig& cfg) {
  if (!(cfg.crop_scale_low > 0.0) || cfg.crop_scale_low > cfg.crop_scale_high ||
      cfg.crop_scale_high > 1.0)
    throw ContractError("AugmentationConfig: need 0 < scale_low <= scale_high <= 1");
  if (cfg.output_size < 16)
    throw ContractError("AugmentationConfig: output_size must be >= 16");
  for (double p : {cfg.color_jitter_prob, cfg.grayscale_prob, cfg.blur_prob,
                   cfg.hflip_prob}) {
    if (p < 0.0 || p > 1.0)
      throw ContractError("AugmentationConfig: probabilities must be in [0,1]");
  }
}

Image rot90(const Image& img, int k) {
  int r = k % 4;
  if (r < 0) r += 4;
  Image out = img;
  for (int i = 0; i < r; ++i) out = rot90_once(out);
  return out;
}

Image hflip(const Image& img) {
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, y, img.width - 1 - x) = img.at(c, y, x);
  return out;
}

Image random_dihedral(const Image& img, Rng& rng) {
  const auto e = rng.uniform_below(8);
  const Image* src = &img;
  Image flipped;
  if (e >= 4) {
    flipped = hflip(img);
    src = &flipped;
  }
  return rot90(*src, static_cast<int>(e % 4));
}

Image adjust_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& v : out.pix) v = clamp01(v * static_cast<float>(factor));
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  // Blend against the mean gray level of the whole image.
  double mean = 0.0;
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < plane; ++i)
    mean += luma(img.pix[i], img.pix[plane + i], img.pix[2 * plane + i]);
  mean /= static_cast<double>(plane);
  const float m = static_cast<float>(mean);
  const float f = static_cast<float>(factor);
  Image out = img;
  for (auto& v : out.pix) v = clamp01(v * f + m * (1.0f - f));
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  Image out = img;
  const float f = static_cast<float>(factor);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float g = luma(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = clamp01(img.at(c, y, x) * f + g * (1.0f - f));
    }
  return out;
}

Image adjust_hue(const Image& img, double delta) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float h, s, v;
      rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x), h, s, v);
      float r, g, b;
      hsv_to_rgb(h + static_cast<float>(delta), s, v, r, g, b);
      out.at(0, y, x) = clamp01(r);
      out.at(1, y, x) = clamp01(g);
      out.at(2, y, x) = clamp01(b);
    }
  return out;
}

Image to_grayscale(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float g = luma(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = g;
    }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    const float w = static_cast<float>(std::exp(-0.5 * (i * i) / (sigma * sigma)));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  Image tmp(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 img.at(c, y, clampi(x + i, img.width - 1));
        tmp.at(c, y, x) = acc;
      }
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 tmp.at(c, clampi(y + i, img.height - 1), x);
        out.at(c, y, x) = clamp01(acc);
      }
  return out;
}

Image random_resized_crop(const Image& img, const AugmentationConfig& cfg,
                          Rng& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  constexpr int kAttempts = 10;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const double target = area * rng.uniform(cfg.crop_scale_low, cfg.crop_scale_high);
    const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
    const double ratio = std::exp(log_ratio);
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w < 1 || h < 1 || w > img.width || h > img.height) continue;
    const int x0 = static_cast<int>(rng.uniform_below(
        static_cast<std::uint64_t>(img.width - w + 1)));
    const int y0 = static_cast<int>(rng.uniform_below(
        static_cast<std::uint64_t>(img.height - h + 1)));
    return resize_bilinear(crop(img, x0, y0, w, h), cfg.output_size, cfg.output_size);
  }
  return resize_bilinear(img, cfg.output_size, cfg.output_size);
}

Image augment_view(const Image& img, const AugmentationConfig& cfg, Rng& rng) {
  validate(cfg);
  Image view = random_resized_crop(img, cfg, rng);

  if (rng.bernoulli(cfg.color_jitter_prob)) {
    // Apply the four jitter ops in a random order, torchvision style.
    std::array<int, 4> order{0, 1, 2, 3};
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
    for (int op : order) {
      switch (op) {
        case 0:
          if (cfg.color_jitter.brightness > 0.0)
            view = adjust_brightness(
                view, rng.uniform(std::max(0.0, 1.0 - cfg.color_jitter.brightness),
                                  1.0 + cfg.color_jitter.brightness));
          break;
        case 1:
          if (cfg.color_jitter.contrast > 0.0)
            view = adjust_contrast(
                view, rng.uniform(std::max(0.0, 1.0 - cfg.color_jitter.contrast),
                                  1.0 + cfg.color_jitter.contrast));
          break;
        case 2:
          if (cfg.color_jitter.saturation > 0.0)
            view = adjust_saturation(
                view, rng.uniform(std::max(0.0, 1.0 - cfg.color_jitter.saturation),
                                  1.0 + cfg.color_jitter.saturation));
          break;
        default:
          if (cfg.color_jitter.hue > 0.0)
            view = adjust_hue(view,
                              rng.uniform(-cfg.color_jitter.hue, cfg.color_jitter.hue));
          break;
      }
    }
  }
  if (rng.bernoulli(cfg.grayscale_prob)) view = to_grayscale(view);
  if (rng.bernoulli(cfg.blur_prob))
    view = gaussian_blur(view, rng.uniform(0.1, 2.0));
  if (rng.bernoulli(cfg.hflip_prob)) view = hflip(view);
  if (cfg.dihedral_enabled) view = random_dihedral(view, rng);
  return view;
}

Image eval_view(const Image& img, int output_size) {
  return resize_bilinear(img, output_size, output_size);
}

std::pair<Image, Image> make_query_key_views(const data::ImageRecord& query,
                                             const data::ImageRecord& key,
                                             data::ImageStore& store,
                                             const AugmentationConfig& cfg,
                                             const Rng& sample_rng) {
  const Image& q_img = store.get(query);
  const Image& k_img = store.get(key);
  Rng rng_q = sample_rng.substream("view_q");
  Rng rng_k = sample_rng.substream("view_k");
  return {augment_view(q_img, cfg, rng_q), augment_view(k_img, cfg, rng_k)};
}

}  // namespace mocotp::aug
