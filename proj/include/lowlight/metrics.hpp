// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lowlight/image.hpp"

namespace lowlight {

/// Cap returned for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(max_val^2 / MSE), capped at kPsnrCap.
double psnr(const ImagePlane& a, const ImagePlane& b, double max_val = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean SSIM over the valid (fully covered) window positions, averaged over
/// channels. Throws ConfigError when an extent is smaller than the window.
double ssim(const ImagePlane& a, const ImagePlane& b, const SsimOptions& options = {});

}  // namespace lowlight
