// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "lowlight/isp.hpp"
#include "lowlight/rng.hpp"

namespace lowlight {

/// Poisson shot noise plus Gaussian read noise. Row noise and quantization
/// banding are not modelled.
struct SensorNoiseParams {
  double system_gain = 2.0;  // K, digital numbers per photoelectron
  double read_sigma = 4.0;   // DN
  double black_level = 512;
  double white_level = 16383;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Simulates a short exposure of `clean`, 1/ratio as long. The result carries
/// exposure_ratio = ratio so that the ISP's amplification restores the level.
/// `clean` must use the same black/white levels as `params`.
RawFrame degrade(const RawFrame& clean, double exposure_ratio, const SensorNoiseParams& params);

/// Camera description used when turning images into synthetic raw frames.
struct SyntheticCamera {
  CfaPattern cfa = CfaPattern::RGGB;
  double black_level = 512;
  double white_level = 16383;
  WbGains wb_gains{2.0, 1.0, 1.6};
  Ccm ccm{1.60, -0.45, -0.15, -0.25, 1.50, -0.25, -0.05, -0.50, 1.55};
};

/// Inverse of pack_bayer -> linearize -> white_balance -> demosaic_bin for a
/// linear-RGB image: green is replicated into G1 and G2, then quantized to DN.
RawFrame mosaic_from_lrgb(const ImagePlane& lrgb, const SyntheticCamera& camera);
/// sRGB image -> inverse gamma -> inverse color matrix -> mosaic_from_lrgb.
RawFrame mosaic_from_srgb(const ImagePlane& srgb, const SyntheticCamera& camera);

struct RawPair {
  RawFrame noisy;
  RawFrame clean;
  double ratio = 1.0;
  int image_index = 0;
};

/// One pair per (image, ratio). Images may be sRGB or linear-RGB. The noise
/// seed of pair k is params.seed ^ k.
std::vector<RawPair> make_dataset(const std::vector<ImagePlane>& clean_images, const std::vector<double>& ratios,
                                  const SensorNoiseParams& params, const SyntheticCamera& camera = {});

}  // namespace lowlight
