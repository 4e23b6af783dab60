#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mocotp/tensor.hpp"

namespace mocotp {

// 3-channel raster, CHW layout, float values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pix;

  Image() = default;
  Image(int c, int h, int w)
      : channels(c), height(h), width(w),
        pix(static_cast<std::size_t>(c) * h * w, 0.0f) {}

  float& at(int c, int y, int x) {
    return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return pix[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// Lossless 8-bit RGB PNG I/O. Reads grayscale/paletted/alpha files by
// expanding to RGB; writes exactly 3 channels.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

// Quantize to 8 bits and back, the exact transform used when rasters hit
// disk. round(v*255)/255 with clamping.
Image quantize_u8(const Image& img);

Image crop(const Image& img, int x0, int y0, int w, int h);
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Stacks same-shape images into an (N,C,H,W) batch.
Tensor to_batch(const std::vector<Image>& images);
Image from_batch(const Tensor& batch, int index);

}  // namespace mocotp
