// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "lowlight/image.hpp"

namespace lowlight {

/// Procedural linear-RGB test scene: a smooth two-colour gradient with
/// rectangles, discs and a striped patch on top. Values lie in [0.02, 0.9].
ImagePlane make_scene(int width, int height, std::uint64_t seed);

/// Scenes with seeds derive_seed(seed, i), i = 0..count-1.
std::vector<ImagePlane> make_scenes(int count, int width, int height, std::uint64_t seed);

}  // namespace lowlight
