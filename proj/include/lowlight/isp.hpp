// SPDX-License-Identifier: Apache-2.0
#pragma once

// Raw Bayer to linear RGB / sRGB conversion.
//
// Packed images always use channel order R, G1, G2, B, where G1 and G2 are
// the first and second green sites of the 2x2 CFA cell in raster order.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lowlight/image.hpp"

namespace lowlight {

enum class CfaPattern { RGGB, BGGR, GRBG, GBRG };

std::string to_string(CfaPattern p);
CfaPattern parse_cfa_pattern(const std::string& name);
/// (row, col) offset inside the 2x2 cell of packed channel c (0=R, 1=G1, 2=G2, 3=B).
std::array<int, 2> cfa_offset(CfaPattern p, int channel);

struct RawFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> mosaic;
  CfaPattern cfa = CfaPattern::RGGB;
  double black_level = 512;
  double white_level = 16383;
  std::array<double, 3> wb_gains{1.0, 1.0, 1.0};
  std::array<double, 9> ccm{1, 0, 0, 0, 1, 0, 0, 0, 1};
  double exposure_ratio = 1.0;

  /// Checks the frame invariants; throws ShapeError or ConfigError.
  void validate() const;
};

using Ccm = std::array<double, 9>;
using WbGains = std::array<double, 3>;

ImagePlane pack_bayer(const RawFrame& frame);
/// Inverse of pack_bayer; values must be integral digital numbers.
std::vector<std::uint16_t> unpack_bayer(const ImagePlane& packed, CfaPattern pattern);

/// v -> clamp((v - black) / (white - black), 0, 1)
ImagePlane linearize(const ImagePlane& packed, double black_level, double white_level);
/// v -> min(1, ratio * v) on packed or linear-RGB images.
ImagePlane amplify(const ImagePlane& img, double ratio);
ImagePlane white_balance(const ImagePlane& packed, const WbGains& gains);
/// 2x2 binning: R, (G1 + G2) / 2, B at packed resolution.
ImagePlane demosaic_bin(const ImagePlane& packed);
ImagePlane color_correct(const ImagePlane& lrgb, const Ccm& ccm);
ImagePlane gamma_compress(const ImagePlane& lrgb);
/// Inverse sRGB transfer, sRGB -> linear-RGB.
ImagePlane gamma_expand(const ImagePlane& srgb);

double srgb_encode(double v);
double srgb_decode(double v);

/// pack -> linearize -> amplify(exposure_ratio) -> white balance -> bin
ImagePlane raw_to_lrgb(const RawFrame& frame);
/// pack -> linearize -> white balance -> bin -> color correct -> gamma
ImagePlane raw_to_srgb_reference(const RawFrame& frame);
/// Display rendering of an already linear image: color correct -> gamma.
ImagePlane lrgb_to_srgb(const ImagePlane& lrgb, const Ccm& ccm);

Ccm invert_ccm(const Ccm& ccm);

}  // namespace lowlight
