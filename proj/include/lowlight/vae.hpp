// SPDX-License-Identifier: Apache-2.0
#pragma once

// Content-preserving VAE. Every encoder block's output E_b is carried to the
// decoder through its own 3x3 convolution and added to the decoder feature
// at the same resolution: D_{b+1} = D_b + Conv_b(E_b).

#include <cstdint>
#include <span>
#include <vector>

#include "lowlight/nn.hpp"

namespace lowlight {

struct VaeConfig {
  int in_channels = 3;
  int out_channels = 3;
  int base_channels = 16;
  std::vector<int> channel_multipliers{1, 2, 4};
  // Empty means "same as the encoder".
  std::vector<int> decoder_multipliers;
  int latent_channels = 4;
  double kl_weight = 1e-4;

  int num_blocks() const { return static_cast<int>(channel_multipliers.size()); }
  int downsample_factor() const { return 1 << num_blocks(); }
  int encoder_channels(int block) const;
  int decoder_channels(int block) const;
  void validate() const;
};

struct VaeOutput {
  Tensor mu;
  Tensor logvar;
  std::vector<Tensor> skip_features;  // E_b, finest first
};

class Vae {
 public:
  Vae(VaeConfig config, std::uint64_t seed);

  /// x: [N, C, H, W] or [C, H, W] with H and W divisible by the downsample factor.
  VaeOutput encode(const Tensor& x) const;
  /// Residual decode when `skips` holds one feature per block; plain decode when empty.
  /// Output is clamped to [0, 1].
  Tensor decode(const Tensor& z, std::span<const Tensor> skips = {}) const;

  const VaeConfig& config() const { return config_; }
  nn::ParamList parameters() const;
  /// The per-block Conv_b layers, finest first.
  std::vector<nn::Conv2d>& residual_convs() { return residual_; }

 private:
  VaeConfig config_;
  nn::Conv2d enc_in_;
  std::vector<nn::Conv2d> enc_block_;
  std::vector<nn::Conv2d> enc_down_;
  nn::Conv2d enc_out_;
  nn::Conv2d dec_in_;
  std::vector<nn::Conv2d> dec_up_;
  std::vector<nn::Conv2d> residual_;
  std::vector<nn::Conv2d> dec_block_;
  nn::Conv2d dec_out_;
};

/// z = mu + exp(logvar / 2) * n,  n ~ N(0, I)
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng);

/// mean over elements of 0.5 * (mu^2 + exp(logvar) - 1 - logvar)
Tensor kl_divergence(const Tensor& mu, const Tensor& logvar);

struct Stage1Loss {
  Tensor total;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// L2(reconstruction, target) + beta * KL
Stage1Loss stage1_objective(const Tensor& reconstruction, const Tensor& target, const Tensor& mu, const Tensor& logvar,
                            double beta);

/// encode(noisy) -> reparameterize -> decode (with skips unless disabled) -> compare to clean.
Stage1Loss stage1_loss(const Vae& vae, const Tensor& noisy_lrgb, const Tensor& clean_srgb, Rng& rng,
                       bool use_skips = true);

}  // namespace lowlight
