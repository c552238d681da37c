// SPDX-License-Identifier: Apache-2.0
#include "lowlight/config.hpp"

#include <fstream>

#include "lowlight/errors.hpp"

namespace lowlight {

using nlohmann::json;

namespace {
template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}
}  // namespace

json to_json(const VaeConfig& c) {
  return {{"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"base_channels", c.base_channels},
          {"channel_multipliers", c.channel_multipliers},
          {"decoder_multipliers", c.decoder_multipliers},
          {"latent_channels", c.latent_channels},
          {"kl_weight", c.kl_weight}};
}

VaeConfig vae_config_from_json(const json& j) {
  VaeConfig c;
  read(j, "in_channels", c.in_channels);
  read(j, "out_channels", c.out_channels);
  read(j, "base_channels", c.base_channels);
  read(j, "channel_multipliers", c.channel_multipliers);
  read(j, "decoder_multipliers", c.decoder_multipliers);
  read(j, "latent_channels", c.latent_channels);
  read(j, "kl_weight", c.kl_weight);
  c.validate();
  return c;
}

json to_json(const UNetConfig& c) {
  json regions = json::array();
  for (const auto& r : c.regions) regions.push_back({r.height, r.width});
  return {{"latent_channels", c.latent_channels},
          {"base_channels", c.base_channels},
          {"channel_multipliers", c.channel_multipliers},
          {"attention_levels", c.attention_levels},
          {"regions", regions},
          {"attention_heads", c.attention_heads},
          {"time_embed_dim", c.time_embed_dim},
          {"num_timesteps", c.num_timesteps}};
}

UNetConfig unet_config_from_json(const json& j) {
  UNetConfig c;
  read(j, "latent_channels", c.latent_channels);
  read(j, "base_channels", c.base_channels);
  read(j, "channel_multipliers", c.channel_multipliers);
  read(j, "attention_levels", c.attention_levels);
  read(j, "attention_heads", c.attention_heads);
  read(j, "time_embed_dim", c.time_embed_dim);
  read(j, "num_timesteps", c.num_timesteps);
  if (j.contains("regions")) {
    c.regions.clear();
    for (const auto& r : j.at("regions")) {
      const auto hw = r.get<std::vector<int>>();
      if (hw.size() != 2) throw ConfigError("unet config: each region is [height, width]");
      c.regions.push_back({hw[0], hw[1]});
    }
  } else {
    c.regions.assign(c.depth(), RegionSpec{2, 2});
  }
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("train config: stage must be 1 or 2");
  if (epochs < 1 || batch_size < 1) throw ConfigError("train config: epochs and batch_size must be positive");
  if (!(lr_main > 0.0) || (stage == 2 && !(lr_new > 0.0))) throw ConfigError("train config: learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train config: betas must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("train config: lambda must be >= 0");
  if (!(cond_dropout_prob >= 0.0 && cond_dropout_prob <= 1.0))
    throw ConfigError("train config: cond_dropout_prob must lie in [0, 1]");
  if (z0_target != "clean_lrgb" && z0_target != "clean_srgb")
    throw ConfigError("train config: z0_target must be clean_lrgb or clean_srgb");
  if (image_loss_samples < 0) throw ConfigError("train config: image_loss_samples must be >= 0");
  vae.validate();
  if (crop_size < 1 || crop_size % vae.downsample_factor() != 0)
    throw ConfigError("train config: crop_size " + std::to_string(crop_size) +
                      " is not divisible by the VAE downsample factor " + std::to_string(vae.downsample_factor()));
  if (stage == 2) {
    unet.validate();
    if (unet.latent_channels != vae.latent_channels)
      throw ConfigError("train config: U-Net and VAE latent channel counts differ");
  }
}

json to_json(const TrainConfig& c) {
  return {{"stage", c.stage},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"crop_size", c.crop_size},
          {"lr_main", c.lr_main},
          {"lr_new", c.lr_new},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"lambda", c.lambda},
          {"cond_dropout_prob", c.cond_dropout_prob},
          {"image_loss_samples", c.image_loss_samples},
          {"image_loss_max_t", c.image_loss_max_t},
          {"seed", c.seed},
          {"null_seed", c.null_seed},
          {"z0_target", c.z0_target},
          {"dataset", c.dataset},
          {"checkpoint_out", c.checkpoint_out},
          {"vae_checkpoint", c.vae_checkpoint},
          {"log_path", c.log_path},
          {"vae", to_json(c.vae)},
          {"unet", to_json(c.unet)},
          {"schedule", {{"T", c.schedule.T}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}}}};
}

TrainConfig train_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  TrainConfig c;
  try {
    read(j, "stage", c.stage);
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "crop_size", c.crop_size);
    read(j, "lr_main", c.lr_main);
    read(j, "lr_new", c.lr_new);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "lambda", c.lambda);
    read(j, "cond_dropout_prob", c.cond_dropout_prob);
    read(j, "image_loss_samples", c.image_loss_samples);
    read(j, "image_loss_max_t", c.image_loss_max_t);
    read(j, "seed", c.seed);
    read(j, "null_seed", c.null_seed);
    read(j, "z0_target", c.z0_target);
    read(j, "dataset", c.dataset);
    read(j, "checkpoint_out", c.checkpoint_out);
    read(j, "vae_checkpoint", c.vae_checkpoint);
    read(j, "log_path", c.log_path);
    if (j.contains("vae")) c.vae = vae_config_from_json(j.at("vae"));
    if (j.contains("unet")) c.unet = unet_config_from_json(j.at("unet"));
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      read(s, "T", c.schedule.T);
      read(s, "beta_start", c.schedule.beta_start);
      read(s, "beta_end", c.schedule.beta_end);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.unet.num_timesteps = c.schedule.T;
  c.dataset = resolve(c.dataset, base_dir);
  c.checkpoint_out = resolve(c.checkpoint_out, base_dir);
  c.vae_checkpoint = resolve(c.vae_checkpoint, base_dir);
  c.log_path = resolve(c.log_path, base_dir);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j, path.parent_path());
}

}  // namespace lowlight
