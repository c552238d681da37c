// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lowlight/checkpoint.hpp"
#include "lowlight/config.hpp"
#include "lowlight/dataset.hpp"
#include "lowlight/diffusion.hpp"
#include "lowlight/optim.hpp"

namespace lowlight {

/// One optimizer step. Stage 1 stores (reconstruction, KL); stage 2 stores
/// (L_LDM, L_image), with L_image NaN when no sample of the batch used it.
struct LossRow {
  int epoch = 0;
  int step = 0;
  double first = 0;
  double second = 0;
  double total = 0;
};

void write_loss_log(std::ostream& out, const std::vector<LossRow>& rows, int stage);
void write_loss_log(const std::string& path, const std::vector<LossRow>& rows, int stage);

using ProgressFn = std::function<void(const std::string&)>;

/// Bernoulli(p) replacement of the condition latent, with counters.
class ConditionDropout {
 public:
  explicit ConditionDropout(double p);
  bool operator()(Rng& rng);
  double probability() const { return p_; }
  long long samples() const { return samples_; }
  long long dropped() const { return dropped_; }
  double rate() const { return samples_ ? double(dropped_) / samples_ : 0.0; }

 private:
  double p_;
  long long samples_ = 0;
  long long dropped_ = 0;
};

struct Stage1Result {
  Vae vae;
  std::vector<LossRow> log;
  std::vector<double> epoch_loss;  // mean total loss per epoch
};

/// Trains the VAE on (noisy linear RGB -> clean sRGB) random crops.
/// `use_skips = false` trains the same model without its residual path.
Stage1Result train_stage1(const TrainConfig& config, const std::vector<TrainingPair>& data,
                          const ProgressFn& progress = {}, bool use_skips = true);

struct Stage2Result {
  LatentDenoiser model;
  double latent_scale = 1.0;
  std::vector<LossRow> log;
  std::vector<double> epoch_ldm;  // mean L_LDM per epoch
  long long samples = 0;
  long long dropped = 0;
};

/// Trains U-Net and context processor against a frozen VAE. The VAE's
/// values are never modified; its tensors are marked as not requiring
/// gradients.
Stage2Result train_stage2(const TrainConfig& config, const std::vector<TrainingPair>& data, const Vae& vae,
                          const ProgressFn& progress = {});

/// Two Adam groups: attention blocks and context processor at lr_new, the
/// rest at lr_main.
Adam make_stage2_optimizer(const LatentDenoiser& model, const TrainConfig& config);

/// 1 / std of the clean latents (posterior means) over centre crops.
double estimate_latent_scale(const Vae& vae, const std::vector<TrainingPair>& data, int crop_size,
                             bool srgb_target = false);

Checkpoint make_vae_checkpoint(const Vae& vae, const TrainConfig* config = nullptr);
Vae vae_from_checkpoint(const Checkpoint& ckpt);

struct DenoiserBundle {
  LatentDenoiser model;
  double latent_scale = 1.0;
  ScheduleConfig schedule;
  std::uint64_t vae_checksum = 0;
};

Checkpoint make_denoiser_checkpoint(const LatentDenoiser& model, double latent_scale, const ScheduleConfig& schedule,
                                    std::uint64_t vae_checksum, const TrainConfig* config = nullptr);
DenoiserBundle denoiser_from_checkpoint(const Checkpoint& ckpt);

}  // namespace lowlight
