// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lowlight/tensor.hpp"

namespace lowlight {

enum class ColorState {
  PackedRaw,   // packed R,G1,G2,B planes holding raw digital numbers
  PackedRGBG,  // packed planes, normalized linear values
  LinearRGB,
  SRGB,
};

std::string to_string(ColorState state);

/// Interleaved H x W x C float image.
struct ImagePlane {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;
  ColorState state = ColorState::LinearRGB;

  static ImagePlane zeros(int width, int height, int channels, ColorState state);

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::size_t size() const { return data.size(); }
};

/// Throws ConfigError naming both states when `img` is not in `expected`.
void require_state(const ImagePlane& img, ColorState expected, const char* stage);

/// [1, C, H, W] tensor view of the image (copy).
Tensor to_tensor(const ImagePlane& img);
/// Inverse of to_tensor for a [1, C, H, W] or [C, H, W] tensor.
ImagePlane from_tensor(const Tensor& t, ColorState state);

ImagePlane crop(const ImagePlane& img, int x0, int y0, int width, int height);

}  // namespace lowlight
