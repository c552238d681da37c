// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "lowlight/isp.hpp"

namespace lowlight {

/// `<dir>/<stem>.meta.json` next to a raw mosaic file.
std::filesystem::path metadata_path(const std::filesystem::path& raw_path);

/// Binary PGM (P5) mosaic plus its JSON sidecar. Throws MissingMetadataError
/// when the sidecar is absent.
RawFrame read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const RawFrame& frame);

/// 8-bit PNG or binary PPM (P6), chosen by extension. 3-channel images only;
/// values are clamped to [0, 1] and rounded to 8 bits.
void write_image(const std::filesystem::path& path, const ImagePlane& img);
/// Reads an 8-bit PNG or PPM as an sRGB image.
ImagePlane read_image(const std::filesystem::path& path);

}  // namespace lowlight
