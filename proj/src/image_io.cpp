#include "stlane/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace stlane {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw std::runtime_error("png: cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: read struct alloc failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: info struct alloc failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: failed to decode " + path.string());
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
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: unsupported channel count in " + path.string());
  }

  ImageU8 img(static_cast<int64_t>(h), static_cast<int64_t>(w), channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = img.data.data() + static_cast<size_t>(r) * w * static_cast<size_t>(channels);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("png: only gray or RGB images are written");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("png: cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: write struct alloc failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: info struct alloc failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: failed to encode " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_const_bytep> rows(static_cast<size_t>(img.height));
  for (int64_t r = 0; r < img.height; ++r)
    rows[static_cast<size_t>(r)] =
        img.data.data() + static_cast<size_t>(r * img.width * img.channels);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor to_float_chw(const ImageU8& img) {
  Tensor t({img.channels, img.height, img.width});
  const int64_t plane = img.height * img.width;
  for (int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < img.channels; ++c)
      t.data[static_cast<size_t>(c * plane + i)] =
          static_cast<float>(img.data[static_cast<size_t>(i * img.channels + c)]) / 255.0f;
  return t;
}

ImageU8 from_float_chw(const Tensor& t) {
  ImageU8 img(t.dim(1), t.dim(2), static_cast<int>(t.dim(0)));
  const int64_t plane = t.dim(1) * t.dim(2);
  for (int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < img.channels; ++c) {
      float v = t.data[static_cast<size_t>(c * plane + i)];
      v = std::min(1.0f, std::max(0.0f, v));
      img.data[static_cast<size_t>(i * img.channels + c)] =
          static_cast<uint8_t>(std::lround(v * 255.0f));
    }
  }
  return img;
}

LaneMask mask_from_image(const ImageU8& img) {
  LaneMask m(img.height, img.width);
  for (int64_t i = 0; i < img.height * img.width; ++i) {
    bool on = false;
    for (int c = 0; c < img.channels; ++c)
      on = on || img.data[static_cast<size_t>(i * img.channels + c)] != 0;
    m.data[static_cast<size_t>(i)] = on ? 1 : 0;
  }
  return m;
}

ImageU8 mask_to_image(const LaneMask& mask) {
  ImageU8 img(mask.height, mask.width, 1);
  for (size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
  return img;
}

ImageU8 heatmap_image(const std::vector<float>& values, int64_t h, int64_t w, int upscale) {
  float lo = values.empty() ? 0.0f : values[0], hi = lo;
  for (float v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = hi - lo;
  ImageU8 img(h * upscale, w * upscale, 1);
  for (int64_t r = 0; r < img.height; ++r) {
    for (int64_t c = 0; c < img.width; ++c) {
      const float v = values[static_cast<size_t>((r / upscale) * w + (c / upscale))];
      const float n = span > 0.0f ? (v - lo) / span : 0.0f;
      img.at(r, c, 0) = static_cast<uint8_t>(std::lround(n * 255.0f));
    }
  }
  return img;
}

}  // namespace stlane
