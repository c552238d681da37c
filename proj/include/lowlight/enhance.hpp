// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lowlight/checkpoint.hpp"
#include "lowlight/dataset.hpp"
#include "lowlight/diffusion.hpp"
#include "lowlight/trainer.hpp"

namespace lowlight {

/// A VAE and a denoiser trained against it.
struct EnhanceModels {
  Vae vae;
  DenoiserBundle denoiser;
  NoiseSchedule schedule;
};

/// Throws IncompatibleCheckpointError unless the denoiser was trained on this
/// exact VAE checkpoint and the latent channel counts agree.
void check_compatible(const Checkpoint& vae_ckpt, const DenoiserBundle& denoiser);

EnhanceModels make_models(const Checkpoint& vae_ckpt, const Checkpoint& denoiser_ckpt);
EnhanceModels load_models(const std::filesystem::path& vae_path, const std::filesystem::path& denoiser_path);

struct EnhanceOptions {
  double guidance = 2.0;
  int steps = 50;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Smallest extent >= n (in pixels) that both the VAE and the U-Net accept.
int padded_extent(const EnhanceModels& models, int n);

/// Linear camera RGB in, sRGB in [0, 1] out, same size. The input is padded
/// by edge replication to an accepted size and the result cropped back.
ImagePlane enhance_lrgb(const EnhanceModels& models, const ImagePlane& lrgb, const EnhanceOptions& options);
ImagePlane enhance_raw(const EnhanceModels& models, const RawFrame& frame, const EnhanceOptions& options);

/// Reads a raw file and its sidecar, enhances it and writes PNG or PPM.
ImagePlane enhance_image(const std::filesystem::path& raw_path, const EnhanceModels& models,
                         const EnhanceOptions& options, const std::filesystem::path& out_path);

struct EvalEntry {
  std::string name;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;  // amplified noisy input through the reference ISP
  double input_ssim = 0;
  double runtime_seconds = 0;
};

struct EvalReport {
  std::vector<EvalEntry> images;
  double mean_psnr = 0;
  double mean_ssim = 0;
  double mean_input_psnr = 0;
  double mean_input_ssim = 0;
  double mean_runtime_seconds = 0;

  nlohmann::json to_json() const;
};

/// Rendering of the noisy input without the model, for comparison.
ImagePlane baseline_srgb(const TrainingPair& pair);

EvalReport evaluate(const EnhanceModels& models, const std::vector<TrainingPair>& pairs, const EnhanceOptions& options,
                    std::vector<ImagePlane>* outputs = nullptr);

}  // namespace lowlight
