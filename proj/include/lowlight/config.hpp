// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "lowlight/denoiser.hpp"
#include "lowlight/vae.hpp"

namespace lowlight {

nlohmann::json to_json(const VaeConfig& c);
VaeConfig vae_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UNetConfig& c);
UNetConfig unet_config_from_json(const nlohmann::json& j);

struct ScheduleConfig {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

/// Settings for either training stage. Missing JSON keys keep these defaults,
/// which form the desk-scale toy configuration.
struct TrainConfig {
  int stage = 1;
  int epochs = 30;
  int batch_size = 8;
  int crop_size = 32;
  double lr_main = 1e-3;
  // Stage 2 rate for the attention blocks and the context processor.
  double lr_new = 5e-3;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double lambda = 1.0;
  double cond_dropout_prob = 0.05;
  // Samples per batch that also receive the decoder loss, among those whose
  // timestep is at most image_loss_max_t.
  int image_loss_samples = 2;
  int image_loss_max_t = 500;
  std::uint64_t seed = 0;
  std::uint64_t null_seed = 0x6e756c6cULL;
  // Image whose latent is the diffusion target: "clean_lrgb" or "clean_srgb".
  std::string z0_target = "clean_lrgb";

  std::string dataset;         // manifest path
  std::string checkpoint_out;  // where to write the trained checkpoint
  std::string vae_checkpoint;  // stage 2 input
  std::string log_path;        // CSV loss log

  VaeConfig vae;
  UNetConfig unet;
  ScheduleConfig schedule;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Relative paths inside the file are resolved against `base_dir`.
TrainConfig train_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace lowlight
