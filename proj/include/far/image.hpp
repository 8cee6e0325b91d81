#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "far/tensor.hpp"

namespace far {

// Interleaved 8-bit RGB image.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), rgb(std::size_t(w) * h * 3, 0) {}

  std::uint8_t& at(int y, int x, int ch) {
    return rgb[(std::size_t(y) * width + x) * 3 + ch];
  }
  std::uint8_t at(int y, int x, int ch) const {
    return rgb[(std::size_t(y) * width + x) * 3 + ch];
  }
  std::int64_t pixels() const { return std::int64_t(width) * height; }
};

// PNG or binary PPM (P6), detected from the file contents.
ImageU8 load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageU8& img);
void save_ppm(const std::filesystem::path& path, const ImageU8& img);

// Conversions between images and 1x3xHxW tensors with values in [0, 1].
Tensor tensor_from_image(const ImageU8& img);
ImageU8 image_from_tensor(const Tensor& t);  // clamps and rounds

// BT.601 luma on the 0..255 scale.
Plane luma_bt601(const ImageU8& img);

ImageU8 center_crop(const ImageU8& img, int size);

// Reflect-pads spatial extents up to the next multiple of `multiple`
// (no-op when already divisible).
Tensor reflect_pad_to_multiple(const Tensor& t, int multiple);
Tensor crop_spatial(const Tensor& t, int height, int width);

}  // namespace far
