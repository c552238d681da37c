// SPDX-License-Identifier: Apache-2.0
#include "lowlight/enhance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "lowlight/errors.hpp"
#include "lowlight/image_io.hpp"
#include "lowlight/isp.hpp"
#include "lowlight/metrics.hpp"

namespace lowlight {

using nlohmann::json;

void check_compatible(const Checkpoint& vae_ckpt, const DenoiserBundle& denoiser) {
  if (vae_ckpt.checksum != denoiser.vae_checksum)
    throw IncompatibleCheckpointError("denoiser was trained against a different VAE checkpoint");
  const VaeConfig vc = vae_config_from_json(vae_ckpt.config.at("vae"));
  if (vc.latent_channels != denoiser.model.config().latent_channels)
    throw IncompatibleCheckpointError("VAE and denoiser latent channel counts differ");
}

EnhanceModels make_models(const Checkpoint& vae_ckpt, const Checkpoint& denoiser_ckpt) {
  DenoiserBundle bundle = denoiser_from_checkpoint(denoiser_ckpt);
  check_compatible(vae_ckpt, bundle);
  NoiseSchedule s = make_linear_schedule(bundle.schedule.T, bundle.schedule.beta_start, bundle.schedule.beta_end);
  return {vae_from_checkpoint(vae_ckpt), std::move(bundle), std::move(s)};
}

EnhanceModels load_models(const std::filesystem::path& vae_path, const std::filesystem::path& denoiser_path) {
  return make_models(load_checkpoint(vae_path), load_checkpoint(denoiser_path));
}

void EnhanceOptions::validate() const {
  if (steps < 1) throw ConfigError("enhance: steps must be positive");
  GuidanceConfig{guidance}.validate();
}

namespace {

bool latent_extent_ok(const UNetConfig& c, int n) {
  if (n % (1 << (c.depth() - 1)) != 0) return false;
  for (int l : c.attention_levels) {
    const int m = n >> l;
    const int r = std::min(c.regions[l].height, m);
    const int r2 = std::min(c.regions[l].width, m);
    if (m % r != 0 || m % r2 != 0) return false;
  }
  return true;
}

ImagePlane pad_edge(const ImagePlane& img, int width, int height) {
  ImagePlane out = ImagePlane::zeros(width, height, img.channels, img.state);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(std::min(y, img.height - 1), std::min(x, img.width - 1), c);
  return out;
}

}  // namespace

int padded_extent(const EnhanceModels& models, int n) {
  if (n < 1) throw ShapeError("enhance: empty image");
  const int f = models.vae.config().downsample_factor();
  int latent = (n + f - 1) / f;
  while (!latent_extent_ok(models.denoiser.model.config(), latent)) ++latent;
  return latent * f;
}

ImagePlane enhance_lrgb(const EnhanceModels& models, const ImagePlane& lrgb, const EnhanceOptions& options) {
  require_state(lrgb, ColorState::LinearRGB, "enhance");
  options.validate();
  NoGradGuard no_grad;
  const int pw = padded_extent(models, lrgb.width), ph = padded_extent(models, lrgb.height);
  const ImagePlane padded = (pw == lrgb.width && ph == lrgb.height) ? lrgb : pad_edge(lrgb, pw, ph);

  const Scalar s = static_cast<Scalar>(models.denoiser.latent_scale);
  VaeOutput enc = models.vae.encode(to_tensor(padded));
  const Tensor z_y = scale(enc.mu, s);
  const LatentDenoiser& model = models.denoiser.model;
  const ContextFeatures cond = model.context_features(z_y);
  const ContextFeatures uncond = model.null_features(z_y.shape());
  Rng rng(options.seed);
  SampleResult r = ddim_sample(as_noise_model(model), models.schedule, z_y.shape(), &cond, &uncond, options.steps,
                               GuidanceConfig{options.guidance}, rng);
  Tensor x = models.vae.decode(scale(r.z0, Scalar(1) / s), enc.skip_features);
  ImagePlane out = from_tensor(x, ColorState::SRGB);
  for (float& v : out.data) {
    if (!std::isfinite(v)) throw NumericError("enhance: non-finite output pixel");
    v = std::clamp(v, 0.0f, 1.0f);
  }
  return (pw == lrgb.width && ph == lrgb.height) ? out : crop(out, 0, 0, lrgb.width, lrgb.height);
}

ImagePlane enhance_raw(const EnhanceModels& models, const RawFrame& frame, const EnhanceOptions& options) {
  return enhance_lrgb(models, raw_to_lrgb(frame), options);
}

ImagePlane enhance_image(const std::filesystem::path& raw_path, const EnhanceModels& models,
                         const EnhanceOptions& options, const std::filesystem::path& out_path) {
  ImagePlane out = enhance_raw(models, read_raw(raw_path), options);
  write_image(out_path, out);
  return out;
}

ImagePlane baseline_srgb(const TrainingPair& pair) {
  return lrgb_to_srgb(pair.noisy_lrgb, pair.ccm);
}

json EvalReport::to_json() const {
  json per = json::array();
  for (const auto& e : images)
    per.push_back({{"name", e.name},
                   {"psnr", e.psnr},
                   {"ssim", e.ssim},
                   {"lpips", nullptr},
                   {"input_psnr", e.input_psnr},
                   {"input_ssim", e.input_ssim},
                   {"runtime_seconds", e.runtime_seconds}});
  return {{"images", per},
          {"mean_psnr", mean_psnr},
          {"mean_ssim", mean_ssim},
          {"mean_lpips", nullptr},
          {"mean_input_psnr", mean_input_psnr},
          {"mean_input_ssim", mean_input_ssim},
          {"mean_runtime_seconds", mean_runtime_seconds}};
}

EvalReport evaluate(const EnhanceModels& models, const std::vector<TrainingPair>& pairs, const EnhanceOptions& options,
                    std::vector<ImagePlane>* outputs) {
  if (pairs.empty()) throw ConfigError("eval: no pairs");
  EvalReport report;
  for (const auto& p : pairs) {
    const auto start = std::chrono::steady_clock::now();
    ImagePlane out = enhance_lrgb(models, p.noisy_lrgb, options);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const ImagePlane base = baseline_srgb(p);
    report.images.push_back({p.name, psnr(out, p.clean_srgb), ssim(out, p.clean_srgb), psnr(base, p.clean_srgb),
                             ssim(base, p.clean_srgb), seconds});
    if (outputs) outputs->push_back(std::move(out));
  }
  const double n = static_cast<double>(report.images.size());
  for (const auto& e : report.images) {
    report.mean_psnr += e.psnr / n;
    report.mean_ssim += e.ssim / n;
    report.mean_input_psnr += e.input_psnr / n;
    report.mean_input_ssim += e.input_ssim / n;
    report.mean_runtime_seconds += e.runtime_seconds / n;
  }
  return report;
}

}  // namespace lowlight
