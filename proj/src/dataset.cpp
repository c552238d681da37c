// SPDX-License-Identifier: Apache-2.0
#include "lowlight/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "lowlight/errors.hpp"
#include "lowlight/image_io.hpp"

namespace lowlight {

namespace fs = std::filesystem;
using nlohmann::json;

TrainingPair make_training_pair(const RawFrame& noisy, const RawFrame& clean, std::string name) {
  if (noisy.width != clean.width || noisy.height != clean.height)
    throw ShapeError("training pair " + name + ": noisy and clean frames differ in size");
  return {std::move(name), raw_to_lrgb(noisy), raw_to_lrgb(clean), raw_to_srgb_reference(clean), clean.ccm};
}

std::vector<TrainingPair> training_pairs(const std::vector<RawPair>& pairs) {
  std::vector<TrainingPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    out.push_back(make_training_pair(pairs[i].noisy, pairs[i].clean, "pair" + std::to_string(i)));
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  try {
    const json j = json::parse(in);
    const fs::path base = path.parent_path();
    for (const auto& e : j) {
      fs::path noisy = e.at("noisy").get<std::string>(), clean = e.at("clean").get<std::string>();
      out.push_back({noisy.is_absolute() ? noisy : base / noisy, clean.is_absolute() ? clean : base / clean});
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed manifest (" + e.what() + ")");
  }
  if (out.empty()) throw ConfigError(path.string() + ": manifest lists no pairs");
  return out;
}

void write_pairs(const fs::path& dir, const std::vector<RawPair>& pairs, const fs::path& manifest,
                 const std::string& prefix) {
  fs::create_directories(dir);
  json list = json::array();
  const fs::path manifest_dir = manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s%04zu", prefix.c_str(), i);
    const fs::path noisy = dir / (std::string(stem) + "_noisy.pgm"), clean = dir / (std::string(stem) + "_clean.pgm");
    write_raw(noisy, pairs[i].noisy);
    write_raw(clean, pairs[i].clean);
    list.push_back({{"noisy", fs::relative(noisy, manifest_dir).string()},
                    {"clean", fs::relative(clean, manifest_dir).string()}});
  }
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write manifest " + manifest.string());
  out << list.dump(2) << '\n';
}

std::vector<TrainingPair> load_training_pairs(const fs::path& manifest) {
  std::vector<TrainingPair> out;
  for (const auto& e : read_manifest(manifest))
    out.push_back(make_training_pair(read_raw(e.noisy), read_raw(e.clean), e.noisy.stem().string()));
  return out;
}

}  // namespace lowlight
