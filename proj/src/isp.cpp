// SPDX-License-Identifier: Apache-2.0
#include "lowlight/isp.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

namespace {
float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void require_packed(const ImagePlane& img, ColorState state, const char* stage) {
  require_state(img, state, stage);
  if (img.channels != 4) throw ShapeError(std::string(stage) + ": packed images have 4 channels, got " + std::to_string(img.channels));
}

void require_rgb(const ImagePlane& img, const char* stage) {
  require_state(img, ColorState::LinearRGB, stage);
  if (img.channels != 3) throw ShapeError(std::string(stage) + ": expected 3 channels, got " + std::to_string(img.channels));
}
}  // namespace

std::string to_string(CfaPattern p) {
  switch (p) {
    case CfaPattern::RGGB: return "RGGB";
    case CfaPattern::BGGR: return "BGGR";
    case CfaPattern::GRBG: return "GRBG";
    case CfaPattern::GBRG: return "GBRG";
  }
  return "?";
}

CfaPattern parse_cfa_pattern(const std::string& name) {
  for (CfaPattern p : {CfaPattern::RGGB, CfaPattern::BGGR, CfaPattern::GRBG, CfaPattern::GBRG})
    if (to_string(p) == name) return p;
  throw ConfigError("unknown CFA pattern '" + name + "' (expected RGGB, BGGR, GRBG or GBRG)");
}

std::array<int, 2> cfa_offset(CfaPattern p, int channel) {
  const std::string layout = to_string(p);
  // Positions 0..3 of the cell in raster order; greens are taken in order.
  int green_seen = 0;
  for (int pos = 0; pos < 4; ++pos) {
    const char colour = layout[pos];
    int ch = colour == 'R' ? 0 : colour == 'B' ? 3 : 1 + green_seen++;
    if (ch == channel) return {pos / 2, pos % 2};
  }
  throw RangeError("cfa_offset: channel " + std::to_string(channel) + " outside [0, 3]");
}

void RawFrame::validate() const {
  if (width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0)
    throw ShapeError("raw frame: extents " + std::to_string(width) + "x" + std::to_string(height) + " must be even");
  if (mosaic.size() != std::size_t(width) * height)
    throw ShapeError("raw frame: mosaic holds " + std::to_string(mosaic.size()) + " samples for a " +
                     std::to_string(width) + "x" + std::to_string(height) + " frame");
  if (!(black_level >= 0 && black_level < white_level && white_level <= 65535))
    throw ConfigError("raw frame: need 0 <= black_level < white_level <= 65535");
  if (!(exposure_ratio >= 1.0)) throw ConfigError("raw frame: exposure_ratio must be >= 1");
  for (double g : wb_gains)
    if (!(g > 0.0)) throw ConfigError("raw frame: white-balance gains must be positive");
  for (double v : ccm)
    if (!std::isfinite(v)) throw ConfigError("raw frame: color matrix must be finite");
}

ImagePlane pack_bayer(const RawFrame& frame) {
  frame.validate();
  ImagePlane out = ImagePlane::zeros(frame.width / 2, frame.height / 2, 4, ColorState::PackedRaw);
  for (int c = 0; c < 4; ++c) {
    const auto [dy, dx] = cfa_offset(frame.cfa, c);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        out.at(y, x, c) = frame.mosaic[std::size_t(2 * y + dy) * frame.width + 2 * x + dx];
  }
  return out;
}

std::vector<std::uint16_t> unpack_bayer(const ImagePlane& packed, CfaPattern pattern) {
  require_packed(packed, ColorState::PackedRaw, "unpack_bayer");
  const int width = packed.width * 2;
  std::vector<std::uint16_t> mosaic(std::size_t(width) * packed.height * 2);
  for (int c = 0; c < 4; ++c) {
    const auto [dy, dx] = cfa_offset(pattern, c);
    for (int y = 0; y < packed.height; ++y)
      for (int x = 0; x < packed.width; ++x) {
        const float v = packed.at(y, x, c);
        if (!(v >= 0 && v <= 65535) || v != std::floor(v))
          throw RangeError("unpack_bayer: value " + std::to_string(v) + " is not a 16-bit digital number");
        mosaic[std::size_t(2 * y + dy) * width + 2 * x + dx] = static_cast<std::uint16_t>(v);
      }
  }
  return mosaic;
}

ImagePlane linearize(const ImagePlane& packed, double black_level, double white_level) {
  require_packed(packed, ColorState::PackedRaw, "linearize");
  if (!(white_level > black_level)) throw ConfigError("linearize: white level must exceed black level");
  ImagePlane out = packed;
  out.state = ColorState::PackedRGBG;
  const double range = white_level - black_level;
  for (auto& v : out.data) v = clamp01((v - black_level) / range);
  return out;
}

ImagePlane amplify(const ImagePlane& img, double ratio) {
  if (img.state != ColorState::PackedRGBG && img.state != ColorState::LinearRGB)
    throw ConfigError("amplify: expected a normalized linear image, got " + to_string(img.state));
  if (!(ratio >= 1.0)) throw ConfigError("amplify: ratio must be >= 1");
  ImagePlane out = img;
  for (auto& v : out.data) v = static_cast<float>(std::min(1.0, ratio * double(v)));
  return out;
}

ImagePlane white_balance(const ImagePlane& packed, const WbGains& gains) {
  require_packed(packed, ColorState::PackedRGBG, "white_balance");
  for (double g : gains)
    if (!(g > 0.0)) throw ConfigError("white_balance: gains must be positive");
  const double per_channel[4] = {gains[0], gains[1], gains[1], gains[2]};
  ImagePlane out = packed;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = clamp01(double(out.data[i]) * per_channel[i % 4]);
  return out;
}

ImagePlane demosaic_bin(const ImagePlane& packed) {
  require_packed(packed, ColorState::PackedRGBG, "demosaic_bin");
  ImagePlane out = ImagePlane::zeros(packed.width, packed.height, 3, ColorState::LinearRGB);
  for (int y = 0; y < packed.height; ++y)
    for (int x = 0; x < packed.width; ++x) {
      out.at(y, x, 0) = packed.at(y, x, 0);
      out.at(y, x, 1) = static_cast<float>((double(packed.at(y, x, 1)) + double(packed.at(y, x, 2))) / 2.0);
      out.at(y, x, 2) = packed.at(y, x, 3);
    }
  return out;
}

ImagePlane color_correct(const ImagePlane& lrgb, const Ccm& ccm) {
  require_rgb(lrgb, "color_correct");
  ImagePlane out = lrgb;
  for (std::size_t p = 0; p < out.data.size(); p += 3) {
    const double r = lrgb.data[p], g = lrgb.data[p + 1], b = lrgb.data[p + 2];
    for (int row = 0; row < 3; ++row)
      out.data[p + row] = clamp01(ccm[row * 3] * r + ccm[row * 3 + 1] * g + ccm[row * 3 + 2] * b);
  }
  return out;
}

double srgb_encode(double v) { return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055; }

double srgb_decode(double v) { return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4); }

ImagePlane gamma_compress(const ImagePlane& lrgb) {
  require_rgb(lrgb, "gamma_compress");
  ImagePlane out = lrgb;
  out.state = ColorState::SRGB;
  for (auto& v : out.data) v = clamp01(srgb_encode(std::clamp(double(v), 0.0, 1.0)));
  return out;
}

ImagePlane gamma_expand(const ImagePlane& srgb) {
  require_state(srgb, ColorState::SRGB, "gamma_expand");
  ImagePlane out = srgb;
  out.state = ColorState::LinearRGB;
  for (auto& v : out.data) v = clamp01(srgb_decode(std::clamp(double(v), 0.0, 1.0)));
  return out;
}

ImagePlane raw_to_lrgb(const RawFrame& frame) {
  ImagePlane packed = linearize(pack_bayer(frame), frame.black_level, frame.white_level);
  return demosaic_bin(white_balance(amplify(packed, frame.exposure_ratio), frame.wb_gains));
}

ImagePlane raw_to_srgb_reference(const RawFrame& frame) {
  ImagePlane packed = linearize(pack_bayer(frame), frame.black_level, frame.white_level);
  return lrgb_to_srgb(demosaic_bin(white_balance(packed, frame.wb_gains)), frame.ccm);
}

ImagePlane lrgb_to_srgb(const ImagePlane& lrgb, const Ccm& ccm) { return gamma_compress(color_correct(lrgb, ccm)); }

Ccm invert_ccm(const Ccm& m) {
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-12) throw NumericError("invert_ccm: color matrix is singular");
  const double inv = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * inv, (m[2] * m[7] - m[1] * m[8]) * inv, (m[1] * m[5] - m[2] * m[4]) * inv,
          (m[5] * m[6] - m[3] * m[8]) * inv, (m[0] * m[8] - m[2] * m[6]) * inv, (m[2] * m[3] - m[0] * m[5]) * inv,
          (m[3] * m[7] - m[4] * m[6]) * inv, (m[1] * m[6] - m[0] * m[7]) * inv, (m[0] * m[4] - m[1] * m[3]) * inv};
}

}  // namespace lowlight
