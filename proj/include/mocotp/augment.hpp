#pragma once

#include <utility>

#include "mocotp/data.hpp"
#include "mocotp/image.hpp"
#include "mocotp/rng.hpp"

namespace mocotp::aug {

struct ColorJitter {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
};

struct AugmentationConfig {
  double crop_scale_low = 0.2;
  double crop_scale_high = 1.0;
  int output_size = 224;
  ColorJitter color_jitter;
  double color_jitter_prob = 0.8;
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  double hflip_prob = 0.5;
  bool dihedral_enabled = true;
};

void validate(const AugmentationConfig& cfg);

// Exact pixel permutations.
Image rot90(const Image& img, int k);  // k * 90 degrees counter-clockwise
Image hflip(const Image& img);

// Uniform element of the dihedral group D4: rotation by k*90 degrees with an
// optional horizontal flip applied first.
Image random_dihedral(const Image& img, Rng& rng);

// Individual photometric ops, exposed for tests. Outputs stay in [0, 1].
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image adjust_hue(const Image& img, double delta);  // delta in [-0.5, 0.5] turns
Image to_grayscale(const Image& img);
Image gaussian_blur(const Image& img, double sigma);

// Area/aspect-sampled crop resized to output_size; falls back to the full
// image after a bounded number of rejected attempts.
Image random_resized_crop(const Image& img, const AugmentationConfig& cfg,
                          Rng& rng);

// Full MoCo-V2 style view: crop-resize, probabilistic color jitter,
// grayscale, blur, horizontal flip, then (if enabled) a dihedral transform.
Image augment_view(const Image& img, const AugmentationConfig& cfg, Rng& rng);

// Deterministic eval-time transform: resize to output_size, nothing else.
Image eval_view(const Image& img, int output_size);

// Independently augments the two records of a temporal pair. The two views
// consume unrelated rng substreams.
std::pair<Image, Image> make_query_key_views(const data::ImageRecord& query,
                                             const data::ImageRecord& key,
                                             data::ImageStore& store,
                                             const AugmentationConfig& cfg,
                                             const Rng& sample_rng);

}  // namespace mocotp::aug
