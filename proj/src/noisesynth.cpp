// SPDX-License-Identifier: Apache-2.0
#include "lowlight/noisesynth.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

void SensorNoiseParams::validate() const {
  if (!(system_gain > 0.0)) throw ConfigError("noise: system gain K must be positive");
  if (!(read_sigma >= 0.0)) throw ConfigError("noise: read_sigma must be >= 0");
  if (!(black_level >= 0.0 && black_level < white_level && white_level <= 65535))
    throw ConfigError("noise: need 0 <= black_level < white_level <= 65535");
}

RawFrame degrade(const RawFrame& clean, double exposure_ratio, const SensorNoiseParams& params) {
  params.validate();
  clean.validate();
  if (!(exposure_ratio >= 1.0)) throw ConfigError("degrade: exposure ratio must be >= 1");
  Rng rng(params.seed);
  RawFrame out = clean;
  out.black_level = params.black_level;
  out.white_level = params.white_level;
  out.exposure_ratio = exposure_ratio;
  for (std::size_t i = 0; i < out.mosaic.size(); ++i) {
    const double signal = std::max(0.0, (double(clean.mosaic[i]) - params.black_level) / exposure_ratio);
    const double electrons = static_cast<double>(rng.poisson(signal / params.system_gain));
    double dn = electrons * params.system_gain + params.black_level;
    if (params.read_sigma > 0.0) dn += params.read_sigma * rng.normal();
    out.mosaic[i] = static_cast<std::uint16_t>(std::clamp(std::nearbyint(dn), 0.0, params.white_level));
  }
  return out;
}

RawFrame mosaic_from_lrgb(const ImagePlane& lrgb, const SyntheticCamera& camera) {
  require_state(lrgb, ColorState::LinearRGB, "mosaic_from_lrgb");
  if (lrgb.channels != 3) throw ShapeError("mosaic_from_lrgb: expected 3 channels");
  RawFrame frame;
  frame.width = lrgb.width * 2;
  frame.height = lrgb.height * 2;
  frame.cfa = camera.cfa;
  frame.black_level = camera.black_level;
  frame.white_level = camera.white_level;
  frame.wb_gains = camera.wb_gains;
  frame.ccm = camera.ccm;
  frame.exposure_ratio = 1.0;
  frame.mosaic.assign(std::size_t(frame.width) * frame.height, 0);
  const double range = camera.white_level - camera.black_level;
  const double gains[4] = {camera.wb_gains[0], camera.wb_gains[1], camera.wb_gains[1], camera.wb_gains[2]};
  const int source[4] = {0, 1, 1, 2};
  for (int c = 0; c < 4; ++c) {
    const auto [dy, dx] = cfa_offset(camera.cfa, c);
    for (int y = 0; y < lrgb.height; ++y)
      for (int x = 0; x < lrgb.width; ++x) {
        const double v = std::clamp(double(lrgb.at(y, x, source[c])), 0.0, 1.0) / gains[c];
        const double dn = std::nearbyint(camera.black_level + std::clamp(v, 0.0, 1.0) * range);
        frame.mosaic[std::size_t(2 * y + dy) * frame.width + 2 * x + dx] = static_cast<std::uint16_t>(dn);
      }
  }
  return frame;
}

RawFrame mosaic_from_srgb(const ImagePlane& srgb, const SyntheticCamera& camera) {
  ImagePlane lin = gamma_expand(srgb);
  const Ccm inv = invert_ccm(camera.ccm);
  for (std::size_t p = 0; p < lin.data.size(); p += 3) {
    const double r = lin.data[p], g = lin.data[p + 1], b = lin.data[p + 2];
    for (int row = 0; row < 3; ++row)
      lin.data[p + row] =
          static_cast<float>(std::clamp(inv[row * 3] * r + inv[row * 3 + 1] * g + inv[row * 3 + 2] * b, 0.0, 1.0));
  }
  return mosaic_from_lrgb(lin, camera);
}

std::vector<RawPair> make_dataset(const std::vector<ImagePlane>& clean_images, const std::vector<double>& ratios,
                                  const SensorNoiseParams& params, const SyntheticCamera& camera) {
  if (clean_images.empty()) throw ConfigError("make_dataset: no clean images");
  if (ratios.empty()) throw ConfigError("make_dataset: no exposure ratios");
  std::vector<RawPair> pairs;
  pairs.reserve(clean_images.size() * ratios.size());
  for (std::size_t i = 0; i < clean_images.size(); ++i) {
    const ImagePlane& img = clean_images[i];
    RawFrame clean = img.state == ColorState::SRGB ? mosaic_from_srgb(img, camera) : mosaic_from_lrgb(img, camera);
    for (double ratio : ratios) {
      SensorNoiseParams p = params;
      p.black_level = camera.black_level;
      p.white_level = camera.white_level;
      p.seed = derive_seed(params.seed, pairs.size());
      pairs.push_back({degrade(clean, ratio, p), clean, ratio, static_cast<int>(i)});
    }
  }
  return pairs;
}

}  // namespace lowlight
