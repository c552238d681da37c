// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lowlight/attention.hpp"

namespace lowlight {

struct UNetConfig {
  int latent_channels = 4;
  int base_channels = 32;
  std::vector<int> channel_multipliers{1, 2, 2};  // one entry per resolution level
  std::vector<int> attention_levels{0, 1, 2};
  std::vector<RegionSpec> regions{{2, 2}, {2, 2}, {2, 2}};  // per level
  int attention_heads = 1;
  int time_embed_dim = 64;
  int num_timesteps = 1000;

  int depth() const { return static_cast<int>(channel_multipliers.size()); }
  int channels(int level) const { return base_channels * channel_multipliers.at(level); }
  bool has_attention(int level) const;
  void validate() const;
};

/// Sinusoidal embedding: e[2i] = sin(t f_i), e[2i+1] = cos(t f_i), f_i = 10000^(-i / (dim/2)).
/// Throws RangeError when t is outside [0, max_t].
std::vector<Scalar> time_embedding(int t, int dim, int max_t = 1000);

/// Two 3x3 convolutions with a timestep shift in between and a 1x1 skip when
/// the channel count changes.
struct ResBlock {
  nn::Conv2d conv1;
  nn::Conv2d conv2;
  nn::Linear time_proj;
  std::optional<nn::Conv2d> skip;

  static ResBlock create(int in_channels, int out_channels, int time_dim, Rng& rng);
  /// temb may be undefined; the timestep shift is then omitted.
  Tensor operator()(const Tensor& x, const Tensor& temb) const;
  void collect(const std::string& prefix, nn::ParamList& out, bool with_time = true) const;
};

/// Condition features, one per attention level in ascending level order.
using ContextFeatures = std::vector<Tensor>;

class UNet {
 public:
  UNet(UNetConfig config, std::uint64_t seed);

  /// z_t: [1, C, H, W]. `cond` holds one feature map per attention level.
  Tensor operator()(const Tensor& z_t, int t, const ContextFeatures& cond) const;

  /// Encoder conv path (conv_in, residual blocks without the timestep shift,
  /// downsampling), returning the residual-block outputs at attention levels.
  ContextFeatures encoder_features(const Tensor& x) const;

  const UNetConfig& config() const { return config_; }
  nn::ParamList parameters() const;

 private:
  friend class ContextProcessor;
  void check_latent(const Tensor& z) const;

  UNetConfig config_;
  nn::Linear time_fc1_, time_fc2_;
  nn::Conv2d conv_in_;
  std::vector<ResBlock> enc_res_;
  std::vector<AttentionBlock> enc_attn_;  // indexed by level, empty for levels without attention
  std::vector<nn::Conv2d> down_;
  ResBlock mid_;
  std::vector<ResBlock> dec_res_;
  std::vector<AttentionBlock> dec_attn_;
  std::vector<nn::Conv2d> up_;
  nn::Conv2d conv_out_;
};

/// Mirror of the U-Net encoder's conv path that turns the conditioning latent
/// into per-level features. Created as a weight copy of a U-Net's encoder.
class ContextProcessor {
 public:
  ContextProcessor() = default;
  static ContextProcessor from_encoder(const UNet& unet);

  ContextFeatures operator()(const Tensor& z_y) const;
  nn::ParamList parameters() const;

 private:
  UNetConfig config_;
  nn::Conv2d conv_in_;
  std::vector<ResBlock> res_;
  std::vector<nn::Conv2d> down_;
};

/// U-Net plus context processor. The unconditional branch feeds a standard
/// Gaussian latent drawn from `null_seed` through the context processor.
class LatentDenoiser {
 public:
  LatentDenoiser(UNetConfig config, std::uint64_t seed, std::uint64_t null_seed = 0x6e756c6cULL);

  ContextFeatures context_features(const Tensor& z_y) const { return context_(z_y); }
  /// Features of the null condition for a latent of the given shape.
  ContextFeatures null_features(const Shape& latent_shape) const;
  /// cond == nullptr selects the unconditional branch.
  Tensor predict_noise(const Tensor& z_t, int t, const ContextFeatures* cond) const;

  const UNet& unet() const { return unet_; }
  const ContextProcessor& context() const { return context_; }
  std::uint64_t null_seed() const { return null_seed_; }
  const UNetConfig& config() const { return unet_.config(); }

  /// "unet.*" and "context.*" parameters.
  nn::ParamList parameters() const;
  /// Parameters introduced on top of a plain latent diffusion U-Net: the
  /// attention blocks and the whole context processor.
  static bool is_new_module(const std::string& name);

 private:
  UNet unet_;
  ContextProcessor context_;
  std::uint64_t null_seed_;
};

/// Standard Gaussian tensor drawn from its own stream.
Tensor gaussian_tensor(const Shape& shape, std::uint64_t seed);
Tensor gaussian_tensor(const Shape& shape, Rng& rng);

}  // namespace lowlight
