#include "mocotp/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "mocotp/error.hpp"

namespace mocotp {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t to_u8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<std::uint8_t> buf;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  buf.resize(static_cast<std::size_t>(h) * w * 3);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y)
    row_ptrs[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(3, static_cast<int>(h), static_cast<int>(w));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
  return img;
}

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 3) throw ContractError("write_png: expected 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write image file: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.height) * img.width * 3);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        buf[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
            to_u8(img.at(c, y, x));
    row_ptrs[static_cast<std::size_t>(y)] =
        buf.data() + static_cast<std::size_t>(y) * img.width * 3;
  }
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image quantize_u8(const Image& img) {
  Image out(img.channels, img.height, img.width);
  for (std::size_t i = 0; i < img.pix.size(); ++i)
    out.pix[i] = to_u8(img.pix[i]) / 255.0f;
  return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width || y0 + h > img.height)
    throw ContractError("crop: region out of bounds");
  Image out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ContractError("resize: bad output size");
  if (out_h == img.height && out_w == img.width) return img;
  Image out(img.channels, out_h, out_w);
  // Align-corners=false convention: sample at pixel centers.
  const float sy = static_cast<float>(img.height) / out_h;
  const float sx = static_cast<float>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.0f, static_cast<float>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.0f, static_cast<float>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const float top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
        const float bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor to_batch(const std::vector<Image>& images) {
  if (images.empty()) throw ContractError("to_batch: empty image list");
  const Image& first = images.front();
  Tensor batch({static_cast<int>(images.size()), first.channels, first.height,
                first.width});
  const std::size_t stride = first.pix.size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].pix.size() != stride)
      throw ContractError("to_batch: images differ in shape");
    std::copy(images[i].pix.begin(), images[i].pix.end(),
              batch.data.begin() + i * stride);
  }
  return batch;
}

Image from_batch(const Tensor& batch, int index) {
  if (batch.ndim() != 4) throw ContractError("from_batch: expected NCHW");
  Image img(batch.dim(1), batch.dim(2), batch.dim(3));
  const std::size_t stride = img.pix.size();
  std::copy(batch.data.begin() + index * stride,
            batch.data.begin() + (index + 1) * stride, img.pix.begin());
  return img;
}

}  // namespace mocotp
