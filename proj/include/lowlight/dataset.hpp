// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lowlight/noisesynth.hpp"

namespace lowlight {

/// Network-ready views of one raw pair.
struct TrainingPair {
  std::string name;
  ImagePlane noisy_lrgb;  // amplified short exposure
  ImagePlane clean_lrgb;
  ImagePlane clean_srgb;  // reference rendering of the long exposure
  Ccm ccm{};
};

TrainingPair make_training_pair(const RawFrame& noisy, const RawFrame& clean, std::string name = {});
std::vector<TrainingPair> training_pairs(const std::vector<RawPair>& pairs);

struct ManifestEntry {
  std::filesystem::path noisy;
  std::filesystem::path clean;
};

/// Manifest: JSON list of {"noisy": path, "clean": path}; relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
/// Writes `<prefix>NNNN_noisy.pgm` / `_clean.pgm` with sidecars plus a
/// manifest listing them (paths relative to the manifest).
void write_pairs(const std::filesystem::path& dir, const std::vector<RawPair>& pairs,
                 const std::filesystem::path& manifest, const std::string& prefix = "pair");
std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& manifest);

}  // namespace lowlight
