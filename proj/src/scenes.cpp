// SPDX-License-Identifier: Apache-2.0
#include "lowlight/scenes.hpp"

#include <array>
#include <cmath>

#include "lowlight/errors.hpp"
#include "lowlight/rng.hpp"

namespace lowlight {

namespace {
using Colour = std::array<double, 3>;

Colour random_colour(Rng& rng) {
  Colour c;
  for (auto& v : c) v = 0.02 + 0.88 * rng.uniform() * rng.uniform();  // skewed dark, like night scenes
  return c;
}

void paint(ImagePlane& img, int x, int y, const Colour& c) {
  for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<float>(c[ch]);
}
}  // namespace

ImagePlane make_scene(int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) throw ShapeError("make_scene: extents must be positive");
  Rng rng(seed);
  ImagePlane img = ImagePlane::zeros(width, height, 3, ColorState::LinearRGB);

  const Colour top = random_colour(rng), bottom = random_colour(rng);
  const double angle = rng.uniform() * 2 * M_PI;
  const double ux = std::cos(angle), uy = std::sin(angle);
  const double span = std::abs(ux) * width + std::abs(uy) * height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double proj = (ux * (x - width / 2.0) + uy * (y - height / 2.0)) / span + 0.5;
      Colour c;
      for (int ch = 0; ch < 3; ++ch) c[ch] = top[ch] + (bottom[ch] - top[ch]) * proj;
      paint(img, x, y, c);
    }

  const int shapes = 3 + static_cast<int>(rng.uniform_int(0, 4));
  for (int s = 0; s < shapes; ++s) {
    const Colour c = random_colour(rng);
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    const int cx = static_cast<int>(rng.uniform_int(0, width - 1));
    const int cy = static_cast<int>(rng.uniform_int(0, height - 1));
    const int rx = 2 + static_cast<int>(rng.uniform_int(0, std::max(1, width / 4)));
    const int ry = 2 + static_cast<int>(rng.uniform_int(0, std::max(1, height / 4)));
    const int period = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const bool vertical = rng.bernoulli(0.5);
    for (int y = std::max(0, cy - ry); y < std::min(height, cy + ry); ++y)
      for (int x = std::max(0, cx - rx); x < std::min(width, cx + rx); ++x) {
        const double dx = double(x - cx) / rx, dy = double(y - cy) / ry;
        bool inside = true;
        if (kind == 1) inside = dx * dx + dy * dy <= 1.0;
        if (kind == 2) inside = ((vertical ? x : y) / period) % 2 == 0;
        if (inside) paint(img, x, y, c);
      }
  }
  return img;
}

std::vector<ImagePlane> make_scenes(int count, int width, int height, std::uint64_t seed) {
  std::vector<ImagePlane> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(make_scene(width, height, derive_seed(seed, i)));
  return out;
}

}  // namespace lowlight
