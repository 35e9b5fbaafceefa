#pragma once

#include <filesystem>

#include "stlane/tensor.hpp"

namespace stlane {

// 8-bit image, interleaved rows; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int64_t height = 0;
  int64_t width = 0;
  int channels = 1;
  std::vector<uint8_t> data;

  ImageU8() = default;
  ImageU8(int64_t h, int64_t w, int c)
      : height(h), width(w), channels(c), data(static_cast<size_t>(h * w * c), 0) {}
  uint8_t& at(int64_t r, int64_t col, int ch) {
    return data[static_cast<size_t>((r * width + col) * channels + ch)];
  }
  uint8_t at(int64_t r, int64_t col, int ch) const {
    return data[static_cast<size_t>((r * width + col) * channels + ch)];
  }
};

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

// [0,1] float CHW <-> 8-bit interleaved; quantization is round-to-nearest.
Tensor to_float_chw(const ImageU8& img);
ImageU8 from_float_chw(const Tensor& t);

LaneMask mask_from_image(const ImageU8& img);  // nonzero = lane
ImageU8 mask_to_image(const LaneMask& mask);   // 255 = lane

// Grayscale heatmap: values min-max normalized to [0,255], optionally
// upscaled by an integer factor (nearest neighbor).
ImageU8 heatmap_image(const std::vector<float>& values, int64_t h, int64_t w, int upscale);

}  // namespace stlane
