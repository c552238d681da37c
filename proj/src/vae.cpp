// SPDX-License-Identifier: Apache-2.0
#include "lowlight/vae.hpp"

#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

int VaeConfig::encoder_channels(int block) const { return base_channels * channel_multipliers.at(block); }

int VaeConfig::decoder_channels(int block) const {
  const auto& mults = decoder_multipliers.empty() ? channel_multipliers : decoder_multipliers;
  return base_channels * mults.at(block);
}

void VaeConfig::validate() const {
  if (in_channels < 1 || out_channels < 1 || base_channels < 1 || latent_channels < 1)
    throw ConfigError("vae: channel counts must be positive");
  if (channel_multipliers.empty()) throw ConfigError("vae: at least one block is required");
  if (!decoder_multipliers.empty() && decoder_multipliers.size() != channel_multipliers.size())
    throw ConfigError("vae: decoder_multipliers must match channel_multipliers in length");
  for (int m : channel_multipliers)
    if (m < 1) throw ConfigError("vae: multipliers must be >= 1");
  for (int m : decoder_multipliers)
    if (m < 1) throw ConfigError("vae: multipliers must be >= 1");
  if (!(kl_weight >= 0.0)) throw ConfigError("vae: kl_weight must be >= 0");
}

Vae::Vae(VaeConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const int blocks = config_.num_blocks();
  const int enc_last = config_.encoder_channels(blocks - 1);
  const int dec_last = config_.decoder_channels(blocks - 1);

  enc_in_ = nn::Conv2d::create(config_.in_channels, config_.encoder_channels(0), 3, 1, 1, rng);
  for (int b = 0; b < blocks; ++b) {
    const int c = config_.encoder_channels(b);
    const int next = b + 1 < blocks ? config_.encoder_channels(b + 1) : enc_last;
    enc_block_.push_back(nn::Conv2d::create(c, c, 3, 1, 1, rng));
    enc_down_.push_back(nn::Conv2d::create(c, next, 2, 2, 0, rng));
  }
  enc_out_ = nn::Conv2d::create(enc_last, 2 * config_.latent_channels, 3, 1, 1, rng);

  dec_in_ = nn::Conv2d::create(config_.latent_channels, dec_last, 3, 1, 1, rng);
  for (int b = 0; b < blocks; ++b) {
    const int d = config_.decoder_channels(b);
    const int coarser = b + 1 < blocks ? config_.decoder_channels(b + 1) : dec_last;
    dec_up_.push_back(nn::Conv2d::create(coarser, d, 3, 1, 1, rng));
    residual_.push_back(nn::Conv2d::create(config_.encoder_channels(b), d, 3, 1, 1, rng));
    dec_block_.push_back(nn::Conv2d::create(d, d, 3, 1, 1, rng));
  }
  dec_out_ = nn::Conv2d::create(config_.decoder_channels(0), config_.out_channels, 3, 1, 1, rng);
  // Start the clamped output mid-range so no pixel begins in the flat region.
  for (auto& v : dec_out_.bias.mutable_data()) v = Scalar(0.5);
}

VaeOutput Vae::encode(const Tensor& x) const {
  if (x.ndim() != 3 && x.ndim() != 4) throw ShapeError("vae encode: expected [N,C,H,W] or [C,H,W], got " + to_string(x.shape()));
  const int h = x.dim(-2), w = x.dim(-1);
  const int factor = config_.downsample_factor();
  if (h % factor != 0 || w % factor != 0)
    throw ShapeError("vae encode: extents " + std::to_string(h) + "x" + std::to_string(w) +
                     " are not divisible by the downsample factor " + std::to_string(factor));
  if (x.dim(-3) != config_.in_channels)
    throw ShapeError("vae encode: expected " + std::to_string(config_.in_channels) + " channels, got " +
                     to_string(x.shape()));

  VaeOutput out;
  Tensor h_feat = enc_in_(x);
  for (int b = 0; b < config_.num_blocks(); ++b) {
    h_feat = silu(enc_block_[b](h_feat));
    out.skip_features.push_back(h_feat);
    h_feat = silu(enc_down_[b](h_feat));
  }
  Tensor moments = enc_out_(h_feat);
  out.mu = slice_channels(moments, 0, config_.latent_channels);
  out.logvar = slice_channels(moments, config_.latent_channels, 2 * config_.latent_channels);
  return out;
}

Tensor Vae::decode(const Tensor& z, std::span<const Tensor> skips) const {
  const int blocks = config_.num_blocks();
  if (!skips.empty() && static_cast<int>(skips.size()) != blocks)
    throw ShapeError("vae decode: expected " + std::to_string(blocks) + " skip features, got " +
                     std::to_string(skips.size()));
  if (z.ndim() != 3 && z.ndim() != 4) throw ShapeError("vae decode: bad latent shape " + to_string(z.shape()));
  if (z.dim(-3) != config_.latent_channels)
    throw ShapeError("vae decode: latent " + to_string(z.shape()) + " does not have " +
                     std::to_string(config_.latent_channels) + " channels");

  Tensor h = silu(dec_in_(z));
  for (int b = blocks - 1; b >= 0; --b) {
    h = dec_up_[b](upsample_nearest2x(h));
    if (!skips.empty()) {
      const Tensor& e = skips[b];
      if (e.ndim() != h.ndim() || e.dim(-1) != h.dim(-1) || e.dim(-2) != h.dim(-2) ||
          e.dim(-3) != config_.encoder_channels(b) || (h.ndim() == 4 && e.dim(0) != h.dim(0)))
        throw ShapeError("vae decode: skip feature " + std::to_string(b) + " has shape " + to_string(e.shape()) +
                         ", decoder feature is " + to_string(h.shape()));
      h = add(h, residual_[b](e));
    }
    h = silu(h);
    h = silu(dec_block_[b](h));
  }
  return clamp(dec_out_(h), Scalar(0), Scalar(1));
}

nn::ParamList Vae::parameters() const {
  nn::ParamList out;
  enc_in_.collect("encoder.conv_in", out);
  for (std::size_t b = 0; b < enc_block_.size(); ++b) {
    enc_block_[b].collect("encoder.block" + std::to_string(b) + ".conv", out);
    enc_down_[b].collect("encoder.block" + std::to_string(b) + ".down", out);
  }
  enc_out_.collect("encoder.conv_out", out);
  dec_in_.collect("decoder.conv_in", out);
  for (std::size_t b = 0; b < dec_up_.size(); ++b) {
    dec_up_[b].collect("decoder.block" + std::to_string(b) + ".up", out);
    residual_[b].collect("decoder.block" + std::to_string(b) + ".residual", out);
    dec_block_[b].collect("decoder.block" + std::to_string(b) + ".conv", out);
  }
  dec_out_.collect("decoder.conv_out", out);
  return out;
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng) {
  if (mu.shape() != logvar.shape())
    throw ShapeError("reparameterize: mu " + to_string(mu.shape()) + " vs logvar " + to_string(logvar.shape()));
  std::vector<Scalar> noise(mu.size());
  for (auto& v : noise) v = static_cast<Scalar>(rng.normal());
  return add(mu, mul(exp(scale(logvar, Scalar(0.5))), Tensor::from_data(mu.shape(), std::move(noise))));
}

Tensor kl_divergence(const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape())
    throw ShapeError("kl_divergence: mu " + to_string(mu.shape()) + " vs logvar " + to_string(logvar.shape()));
  Tensor terms = sub(add_scalar(add(square(mu), exp(logvar)), Scalar(-1)), logvar);
  return scale(mean(terms), Scalar(0.5));
}

Stage1Loss stage1_objective(const Tensor& reconstruction, const Tensor& target, const Tensor& mu, const Tensor& logvar,
                            double beta) {
  Tensor rec = mse(reconstruction, target);
  Tensor kl = kl_divergence(mu, logvar);
  Stage1Loss out;
  out.reconstruction = rec.item();
  out.kl = kl.item();
  out.total = beta == 0.0 ? rec : add(rec, scale(kl, static_cast<Scalar>(beta)));
  return out;
}

Stage1Loss stage1_loss(const Vae& vae, const Tensor& noisy_lrgb, const Tensor& clean_srgb, Rng& rng, bool use_skips) {
  if (noisy_lrgb.shape() != clean_srgb.shape())
    throw ShapeError("stage1_loss: paired shapes differ: " + to_string(noisy_lrgb.shape()) + " vs " +
                     to_string(clean_srgb.shape()));
  VaeOutput enc = vae.encode(noisy_lrgb);
  Tensor z = reparameterize(enc.mu, enc.logvar, rng);
  Tensor recon = use_skips ? vae.decode(z, enc.skip_features) : vae.decode(z);
  return stage1_objective(recon, clean_srgb, enc.mu, enc.logvar, vae.config().kl_weight);
}

}  // namespace lowlight
