// SPDX-License-Identifier: Apache-2.0
#include "lowlight/image.hpp"

#include "lowlight/errors.hpp"

namespace lowlight {

std::string to_string(ColorState state) {
  switch (state) {
    case ColorState::PackedRaw: return "packed-raw";
    case ColorState::PackedRGBG: return "packed-RGBG";
    case ColorState::LinearRGB: return "linear-RGB";
    case ColorState::SRGB: return "sRGB";
  }
  return "unknown";
}

ImagePlane ImagePlane::zeros(int width, int height, int channels, ColorState state) {
  if (width < 1 || height < 1 || channels < 1) throw ShapeError("image extents must be positive");
  return {width, height, channels, std::vector<float>(std::size_t(width) * height * channels, 0.0f), state};
}

void require_state(const ImagePlane& img, ColorState expected, const char* stage) {
  if (img.state != expected)
    throw ConfigError(std::string(stage) + ": expected a " + to_string(expected) + " image, got " + to_string(img.state));
}

Tensor to_tensor(const ImagePlane& img) {
  std::vector<Scalar> out(img.size());
  const std::size_t plane = std::size_t(img.width) * img.height;
  for (int c = 0; c < img.channels; ++c)
    for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = img.data[p * img.channels + c];
  return Tensor::from_data({1, img.channels, img.height, img.width}, std::move(out));
}

ImagePlane from_tensor(const Tensor& t, ColorState state) {
  if (!(t.ndim() == 4 && t.dim(0) == 1) && t.ndim() != 3)
    throw ShapeError("from_tensor: expected [1,C,H,W] or [C,H,W], got " + to_string(t.shape()));
  const int c = t.dim(-3), h = t.dim(-2), w = t.dim(-1);
  ImagePlane img = ImagePlane::zeros(w, h, c, state);
  const std::size_t plane = std::size_t(w) * h;
  auto src = t.data();
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p) img.data[p * c + ch] = static_cast<float>(src[ch * plane + p]);
  return img;
}

ImagePlane crop(const ImagePlane& img, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > img.width || y0 + height > img.height)
    throw ShapeError("crop: window exceeds the " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     " image");
  ImagePlane out = ImagePlane::zeros(width, height, img.channels, img.state);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

}  // namespace lowlight
