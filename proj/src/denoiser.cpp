// SPDX-License-Identifier: Apache-2.0
#include "lowlight/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

bool UNetConfig::has_attention(int level) const {
  return std::find(attention_levels.begin(), attention_levels.end(), level) != attention_levels.end();
}

void UNetConfig::validate() const {
  if (latent_channels < 1 || base_channels < 1) throw ConfigError("unet: channel counts must be positive");
  if (channel_multipliers.empty()) throw ConfigError("unet: depth must be at least 1");
  for (int m : channel_multipliers)
    if (m < 1) throw ConfigError("unet: channel multipliers must be >= 1");
  if (static_cast<int>(regions.size()) != depth())
    throw ConfigError("unet: expected one region size per level (" + std::to_string(depth()) + "), got " +
                      std::to_string(regions.size()));
  for (const auto& r : regions)
    if (r.height < 1 || r.width < 1) throw ConfigError("unet: region sizes must be positive");
  for (int l : attention_levels)
    if (l < 0 || l >= depth()) throw ConfigError("unet: attention level " + std::to_string(l) + " does not exist");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) throw ConfigError("unet: time_embed_dim must be even");
  if (num_timesteps < 1) throw ConfigError("unet: num_timesteps must be positive");
  if (attention_heads < 1) throw ConfigError("unet: attention_heads must be positive");
  for (int l = 0; l < depth(); ++l)
    if (has_attention(l) && channels(l) % attention_heads != 0)
      throw ConfigError("unet: level " + std::to_string(l) + " channels are not divisible by the head count");
}

std::vector<Scalar> time_embedding(int t, int dim, int max_t) {
  if (t < 0 || t > max_t)
    throw RangeError("time_embedding: t=" + std::to_string(t) + " outside [0, " + std::to_string(max_t) + "]");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("time_embedding: dim must be even and positive");
  const int half = dim / 2;
  std::vector<Scalar> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    out[2 * i] = static_cast<Scalar>(std::sin(t * freq));
    out[2 * i + 1] = static_cast<Scalar>(std::cos(t * freq));
  }
  return out;
}

ResBlock ResBlock::create(int in_channels, int out_channels, int time_dim, Rng& rng) {
  ResBlock b;
  b.conv1 = nn::Conv2d::create(in_channels, out_channels, 3, 1, 1, rng);
  b.time_proj = nn::Linear::create(time_dim, out_channels, rng);
  b.conv2 = nn::Conv2d::create(out_channels, out_channels, 3, 1, 1, rng);
  if (in_channels != out_channels) b.skip = nn::Conv2d::create(in_channels, out_channels, 1, 1, 0, rng);
  return b;
}

Tensor ResBlock::operator()(const Tensor& x, const Tensor& temb) const {
  Tensor h = conv1(silu(x));
  if (temb.defined()) h = add_channel_bias(h, time_proj(silu(temb)));
  h = conv2(silu(h));
  return add(skip ? (*skip)(x) : x, h);
}

void ResBlock::collect(const std::string& prefix, nn::ParamList& out, bool with_time) const {
  conv1.collect(prefix + ".conv1", out);
  if (with_time) time_proj.collect(prefix + ".time_proj", out);
  conv2.collect(prefix + ".conv2", out);
  if (skip) skip->collect(prefix + ".skip", out);
}

namespace {
ResBlock clone_without_time(const ResBlock& b) {
  ResBlock c;
  c.conv1 = b.conv1.clone();
  c.conv2 = b.conv2.clone();
  if (b.skip) c.skip = b.skip->clone();
  return c;
}

int highest_attention_level(const UNetConfig& c) {
  return c.attention_levels.empty() ? -1 : *std::max_element(c.attention_levels.begin(), c.attention_levels.end());
}

std::string level_name(const char* part, int level) { return std::string(part) + std::to_string(level); }
}  // namespace

UNet::UNet(UNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const int depth = config_.depth();
  const int tdim = config_.time_embed_dim;
  time_fc1_ = nn::Linear::create(tdim, tdim, rng);
  time_fc2_ = nn::Linear::create(tdim, tdim, rng);
  conv_in_ = nn::Conv2d::create(config_.latent_channels, config_.channels(0), 3, 1, 1, rng);

  enc_attn_.resize(depth);
  dec_attn_.resize(depth);
  int c_prev = config_.channels(0);
  for (int l = 0; l < depth; ++l) {
    const int c = config_.channels(l);
    enc_res_.push_back(ResBlock::create(c_prev, c, tdim, rng));
    if (config_.has_attention(l)) enc_attn_[l] = AttentionBlock(c, config_.attention_heads, rng);
    if (l + 1 < depth) down_.push_back(nn::Conv2d::create(c, c, 2, 2, 0, rng));
    c_prev = c;
  }
  mid_ = ResBlock::create(c_prev, c_prev, tdim, rng);

  dec_res_.resize(depth);
  up_.resize(depth);
  for (int l = depth - 1; l >= 0; --l) {
    const int c = config_.channels(l);
    dec_res_[l] = ResBlock::create(c_prev + c, c, tdim, rng);
    if (config_.has_attention(l)) dec_attn_[l] = AttentionBlock(c, config_.attention_heads, rng);
    if (l > 0) up_[l] = nn::Conv2d::create(c, c, 3, 1, 1, rng);
    c_prev = c;
  }
  conv_out_ = nn::Conv2d::zeros(config_.channels(0), config_.latent_channels, 3, 1, 1);
}

void UNet::check_latent(const Tensor& z) const {
  if (z.ndim() != 4 || z.dim(0) != 1 || z.dim(1) != config_.latent_channels)
    throw ShapeError("unet: expected a [1," + std::to_string(config_.latent_channels) + ",H,W] latent, got " +
                     to_string(z.shape()));
  const int factor = 1 << (config_.depth() - 1);
  if (z.dim(2) % factor != 0 || z.dim(3) % factor != 0)
    throw ShapeError("unet: latent extents " + to_string(z.shape()) + " are not divisible by " +
                     std::to_string(factor));
  for (int l : config_.attention_levels) {
    const int h = z.dim(2) >> l, w = z.dim(3) >> l;
    const RegionSpec r = effective_region(config_.regions[l], h, w);
    if (h % r.height != 0 || w % r.width != 0)
      throw ShapeError("unet: level " + std::to_string(l) + " grid " + std::to_string(h) + "x" + std::to_string(w) +
                       " of latent " + to_string(z.shape()) + " is not divisible into " + std::to_string(r.height) +
                       "x" + std::to_string(r.width) + " regions");
  }
}

Tensor UNet::operator()(const Tensor& z_t, int t, const ContextFeatures& cond) const {
  check_latent(z_t);
  if (cond.size() != config_.attention_levels.size())
    throw ShapeError("unet: expected " + std::to_string(config_.attention_levels.size()) +
                     " condition feature maps, got " + std::to_string(cond.size()));
  const int depth = config_.depth();
  std::vector<Tensor> cond_at(depth);
  {
    std::vector<int> levels = config_.attention_levels;
    std::sort(levels.begin(), levels.end());
    for (std::size_t i = 0; i < levels.size(); ++i) cond_at[levels[i]] = cond[i];
  }

  const int tdim = config_.time_embed_dim;
  Tensor temb = Tensor::from_data({1, tdim}, time_embedding(t, tdim, config_.num_timesteps));
  temb = time_fc2_(silu(time_fc1_(temb)));

  Tensor h = conv_in_(z_t);
  std::vector<Tensor> skips;
  for (int l = 0; l < depth; ++l) {
    h = enc_res_[l](h, temb);
    if (config_.has_attention(l)) {
      const Tensor& c = cond_at[l];
      if (c.shape() != h.shape())
        throw ShapeError("unet: level " + std::to_string(l) + " condition " + to_string(c.shape()) +
                         " does not match feature " + to_string(h.shape()));
      h = enc_attn_[l](h, c, config_.regions[l]);
    }
    skips.push_back(h);
    if (l + 1 < depth) h = down_[l](h);
  }
  h = mid_(h, temb);
  for (int l = depth - 1; l >= 0; --l) {
    h = dec_res_[l](concat_channels(h, skips[l]), temb);
    if (config_.has_attention(l)) h = dec_attn_[l](h, h, config_.regions[l]);
    if (l > 0) h = up_[l](upsample_nearest2x(h));
  }
  return conv_out_(silu(h));
}

ContextFeatures UNet::encoder_features(const Tensor& x) const {
  check_latent(x);
  ContextFeatures out;
  const int last = highest_attention_level(config_);
  Tensor h = conv_in_(x);
  for (int l = 0; l <= last; ++l) {
    h = enc_res_[l](h, Tensor{});
    if (config_.has_attention(l)) out.push_back(h);
    if (l < last) h = down_[l](h);
  }
  return out;
}

nn::ParamList UNet::parameters() const {
  nn::ParamList out;
  time_fc1_.collect("time.fc1", out);
  time_fc2_.collect("time.fc2", out);
  conv_in_.collect("conv_in", out);
  for (int l = 0; l < config_.depth(); ++l) {
    enc_res_[l].collect(level_name("enc.res", l), out);
    if (config_.has_attention(l)) enc_attn_[l].collect(level_name("enc.attn", l), out);
    if (l + 1 < config_.depth()) down_[l].collect(level_name("enc.down", l), out);
  }
  mid_.collect("mid", out);
  for (int l = config_.depth() - 1; l >= 0; --l) {
    dec_res_[l].collect(level_name("dec.res", l), out);
    if (config_.has_attention(l)) dec_attn_[l].collect(level_name("dec.attn", l), out);
    if (l > 0) up_[l].collect(level_name("dec.up", l), out);
  }
  conv_out_.collect("conv_out", out);
  return out;
}

ContextProcessor ContextProcessor::from_encoder(const UNet& unet) {
  ContextProcessor cp;
  cp.config_ = unet.config_;
  cp.conv_in_ = unet.conv_in_.clone();
  const int last = highest_attention_level(unet.config_);
  for (int l = 0; l <= last; ++l) {
    cp.res_.push_back(clone_without_time(unet.enc_res_[l]));
    if (l < last) cp.down_.push_back(unet.down_[l].clone());
  }
  return cp;
}

ContextFeatures ContextProcessor::operator()(const Tensor& z_y) const {
  if (z_y.ndim() != 4 || z_y.dim(0) != 1 || z_y.dim(1) != config_.latent_channels)
    throw ShapeError("context processor: expected a [1," + std::to_string(config_.latent_channels) +
                     ",H,W] latent, got " + to_string(z_y.shape()));
  const int factor = 1 << (config_.depth() - 1);
  if (z_y.dim(2) % factor != 0 || z_y.dim(3) % factor != 0)
    throw ShapeError("context processor: extents of " + to_string(z_y.shape()) + " are not divisible by " +
                     std::to_string(factor));
  ContextFeatures out;
  Tensor h = conv_in_(z_y);
  for (std::size_t l = 0; l < res_.size(); ++l) {
    h = res_[l](h, Tensor{});
    if (config_.has_attention(static_cast<int>(l))) out.push_back(h);
    if (l < down_.size()) h = down_[l](h);
  }
  return out;
}

nn::ParamList ContextProcessor::parameters() const {
  nn::ParamList out;
  conv_in_.collect("conv_in", out);
  for (std::size_t l = 0; l < res_.size(); ++l) {
    res_[l].collect(level_name("enc.res", static_cast<int>(l)), out, false);
    if (l < down_.size()) down_[l].collect(level_name("enc.down", static_cast<int>(l)), out);
  }
  return out;
}

LatentDenoiser::LatentDenoiser(UNetConfig config, std::uint64_t seed, std::uint64_t null_seed)
    : unet_(std::move(config), seed), context_(ContextProcessor::from_encoder(unet_)), null_seed_(null_seed) {}

ContextFeatures LatentDenoiser::null_features(const Shape& latent_shape) const {
  return context_(gaussian_tensor(latent_shape, null_seed_));
}

Tensor LatentDenoiser::predict_noise(const Tensor& z_t, int t, const ContextFeatures* cond) const {
  if (cond) return unet_(z_t, t, *cond);
  return unet_(z_t, t, null_features(z_t.shape()));
}

nn::ParamList LatentDenoiser::parameters() const {
  nn::ParamList out;
  for (auto& p : unet_.parameters()) out.push_back({"unet." + p.name, p.tensor});
  for (auto& p : context_.parameters()) out.push_back({"context." + p.name, p.tensor});
  return out;
}

bool LatentDenoiser::is_new_module(const std::string& name) {
  return name.rfind("context.", 0) == 0 || name.find(".attn") != std::string::npos;
}

Tensor gaussian_tensor(const Shape& shape, Rng& rng) {
  std::vector<Scalar> v(numel(shape));
  for (auto& x : v) x = static_cast<Scalar>(rng.normal());
  return Tensor::from_data(shape, std::move(v));
}

Tensor gaussian_tensor(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_tensor(shape, rng);
}

}  // namespace lowlight
