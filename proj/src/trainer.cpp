// SPDX-License-Identifier: Apache-2.0
#include "lowlight/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "lowlight/errors.hpp"

namespace lowlight {

using nlohmann::json;

void write_loss_log(std::ostream& out, const std::vector<LossRow>& rows, int stage) {
  out << (stage == 1 ? "epoch,step,L_recon,L_kl,total\n" : "epoch,step,L_LDM,L_image,total\n");
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << r.first << ',';
    if (!std::isnan(r.second)) out << r.second;
    out << ',' << r.total << '\n';
  }
}

void write_loss_log(const std::string& path, const std::vector<LossRow>& rows, int stage) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss log " + path);
  write_loss_log(out, rows, stage);
}

ConditionDropout::ConditionDropout(double p) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("condition dropout probability must lie in [0, 1]");
}

bool ConditionDropout::operator()(Rng& rng) {
  const bool drop = rng.bernoulli(p_);
  ++samples_;
  dropped_ += drop;
  return drop;
}

namespace {

void check_data(const std::vector<TrainingPair>& data, int crop) {
  if (data.empty()) throw ConfigError("training: the dataset is empty");
  for (const auto& p : data)
    if (p.noisy_lrgb.width < crop || p.noisy_lrgb.height < crop)
      throw ConfigError("training: image " + p.name + " is smaller than the " + std::to_string(crop) + " crop");
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  return order;
}

// Stacks equally sized images into one [N, C, H, W] tensor.
Tensor stack(const std::vector<ImagePlane>& images) {
  const auto& f = images.front();
  std::vector<Scalar> data;
  data.reserve(images.size() * f.size());
  for (const auto& img : images) {
    Tensor t = to_tensor(img);
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor::from_data({static_cast<int>(images.size()), f.channels, f.height, f.width}, std::move(data));
}

void report(const ProgressFn& progress, const std::string& message) {
  if (progress) progress(message);
}

struct EncodedPair {
  Tensor z_clean;
  Tensor z_noisy;
  std::vector<Tensor> skips;
  Tensor clean_srgb;
};

EncodedPair encode_pair(const Vae& vae, const TrainingPair& p, int x0, int y0, int crop, double scale_factor,
                        bool srgb_target) {
  NoGradGuard no_grad;
  EncodedPair e;
  VaeOutput noisy = vae.encode(to_tensor(lowlight::crop(p.noisy_lrgb, x0, y0, crop, crop)));
  e.z_noisy = scale(noisy.mu, static_cast<Scalar>(scale_factor));
  e.skips = std::move(noisy.skip_features);
  e.z_clean = scale(vae.encode(to_tensor(lowlight::crop(srgb_target ? p.clean_srgb : p.clean_lrgb, x0, y0, crop, crop))).mu, static_cast<Scalar>(scale_factor));
  e.clean_srgb = to_tensor(lowlight::crop(p.clean_srgb, x0, y0, crop, crop));
  return e;
}

}  // namespace

Stage1Result train_stage1(const TrainConfig& config, const std::vector<TrainingPair>& data, const ProgressFn& progress,
                          bool use_skips) {
  config.validate();
  const int crop = config.crop_size;
  check_data(data, crop);
  Stage1Result result{Vae(config.vae, derive_seed(config.seed, 1)), {}, {}};
  Vae& vae = result.vae;
  nn::ParamList params = vae.parameters();
  Adam opt({{nn::tensors_of(params), config.lr_main}}, config.beta1, config.beta2);
  Rng rng(config.seed);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(data.size(), rng);
    double epoch_total = 0;
    int epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<ImagePlane> noisy, clean;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingPair& p = data[order[i]];
        const int x0 = static_cast<int>(rng.uniform_int(0, p.noisy_lrgb.width - crop));
        const int y0 = static_cast<int>(rng.uniform_int(0, p.noisy_lrgb.height - crop));
        noisy.push_back(lowlight::crop(p.noisy_lrgb, x0, y0, crop, crop));
        clean.push_back(lowlight::crop(p.clean_srgb, x0, y0, crop, crop));
      }
      opt.zero_grad();
      Stage1Loss loss = stage1_loss(vae, stack(noisy), stack(clean), rng, use_skips);
      loss.total.backward();
      opt.step();
      const double total = loss.total.item();
      result.log.push_back({epoch, step++, loss.reconstruction, loss.kl, total});
      epoch_total += total;
      ++epoch_steps;
    }
    result.epoch_loss.push_back(epoch_total / epoch_steps);
    std::ostringstream msg;
    msg << "stage1 epoch " << epoch + 1 << "/" << config.epochs << " loss " << result.epoch_loss.back();
    report(progress, msg.str());
  }
  return result;
}

Adam make_stage2_optimizer(const LatentDenoiser& model, const TrainConfig& config) {
  std::vector<Tensor> main_params, new_params;
  for (const auto& p : model.parameters())
    (LatentDenoiser::is_new_module(p.name) ? new_params : main_params).push_back(p.tensor);
  return Adam({{main_params, config.lr_main}, {new_params, config.lr_new}}, config.beta1, config.beta2);
}

double estimate_latent_scale(const Vae& vae, const std::vector<TrainingPair>& data, int crop_size, bool srgb_target) {
  NoGradGuard no_grad;
  double sum = 0, sum_sq = 0;
  std::size_t count = 0;
  for (const auto& p : data) {
    const ImagePlane& target = srgb_target ? p.clean_srgb : p.clean_lrgb;
    const int x0 = (target.width - crop_size) / 2, y0 = (target.height - crop_size) / 2;
    Tensor mu = vae.encode(to_tensor(lowlight::crop(target, x0, y0, crop_size, crop_size))).mu;
    for (Scalar v : mu.data()) {
      sum += v;
      sum_sq += double(v) * v;
      ++count;
    }
  }
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  if (!(var > 1e-12)) throw NumericError("latent scale: clean latents have no variance");
  return 1.0 / std::sqrt(var);
}

Stage2Result train_stage2(const TrainConfig& config, const std::vector<TrainingPair>& data, const Vae& vae,
                          const ProgressFn& progress) {
  config.validate();
  const int crop = config.crop_size;
  check_data(data, crop);
  if (vae.config().latent_channels != config.unet.latent_channels)
    throw IncompatibleCheckpointError("stage 2: VAE latent channels do not match the U-Net config");
  nn::set_requires_grad(vae.parameters(), false);

  Stage2Result result{LatentDenoiser(config.unet, derive_seed(config.seed, 2), config.null_seed), 1.0, {}, {}, 0, 0};
  LatentDenoiser& model = result.model;
  const bool srgb_target = config.z0_target == "clean_srgb";
  result.latent_scale = estimate_latent_scale(vae, data, crop, srgb_target);
  report(progress, "stage2 latent scale " + std::to_string(result.latent_scale));

  // Whole-image crops never change, so their encodings are computed once.
  const bool cache = std::all_of(data.begin(), data.end(), [&](const TrainingPair& p) {
    return p.noisy_lrgb.width == crop && p.noisy_lrgb.height == crop;
  });
  std::vector<EncodedPair> cached;
  if (cache)
    for (const auto& p : data) cached.push_back(encode_pair(vae, p, 0, 0, crop, result.latent_scale, srgb_target));

  const NoiseSchedule schedule = make_linear_schedule(config.schedule.T, config.schedule.beta_start, config.schedule.beta_end);
  const NoiseModel noise_model = as_noise_model(model);
  Adam opt = make_stage2_optimizer(model, config);
  ConditionDropout dropout(config.cond_dropout_prob);
  Rng rng(config.seed);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(data.size(), rng);
    double epoch_ldm = 0;
    int epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Scalar inv_batch = static_cast<Scalar>(1.0 / double(end - start));
      opt.zero_grad();
      double ldm_sum = 0, image_sum = 0, total_sum = 0;
      int image_count = 0;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingPair& p = data[order[i]];
        EncodedPair fresh;
        if (!cache) {
          const int x0 = static_cast<int>(rng.uniform_int(0, p.noisy_lrgb.width - crop));
          const int y0 = static_cast<int>(rng.uniform_int(0, p.noisy_lrgb.height - crop));
          fresh = encode_pair(vae, p, x0, y0, crop, result.latent_scale, srgb_target);
        }
        const EncodedPair& e = cache ? cached[order[i]] : fresh;

        const bool drop = dropout(rng);
        const Tensor z_y = drop ? gaussian_tensor(e.z_noisy.shape(), rng) : e.z_noisy;
        const ContextFeatures cond = model.context_features(z_y);
        const int t = static_cast<int>(rng.uniform_int(1, schedule.T));
        LdmTerms terms = ldm_terms(noise_model, schedule, e.z_clean, &cond, t, rng);
        Tensor total = terms.loss;
        if (config.lambda > 0.0 && image_count < config.image_loss_samples && t <= config.image_loss_max_t) {
          Tensor z_hat0 = one_step_z0(schedule, terms.z_t, t, terms.eps_hat);
          Tensor img = image_loss(vae, z_hat0, e.skips, e.clean_srgb, result.latent_scale);
          total = combined_loss(terms.loss, img, config.lambda);
          image_sum += img.item();
          ++image_count;
        }
        scale(total, inv_batch).backward();
        ldm_sum += terms.loss.item();
        total_sum += total.item();
      }
      opt.step();
      const double n = double(end - start);
      const double image_mean = image_count ? image_sum / image_count : std::numeric_limits<double>::quiet_NaN();
      result.log.push_back({epoch, step++, ldm_sum / n, image_mean, total_sum / n});
      epoch_ldm += ldm_sum / n;
      ++epoch_steps;
    }
    result.epoch_ldm.push_back(epoch_ldm / epoch_steps);
    std::ostringstream msg;
    msg << "stage2 epoch " << epoch + 1 << "/" << config.epochs << " L_LDM " << result.epoch_ldm.back();
    report(progress, msg.str());
  }
  result.samples = dropout.samples();
  result.dropped = dropout.dropped();
  return result;
}

Checkpoint make_vae_checkpoint(const Vae& vae, const TrainConfig* config) {
  Checkpoint ckpt;
  ckpt.config = {{"kind", "vae"}, {"vae", to_json(vae.config())}};
  if (config) ckpt.config["train"] = to_json(*config);
  add_tensors(ckpt, vae.parameters());
  return ckpt;
}

Vae vae_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config.value("kind", "") != "vae") throw IncompatibleCheckpointError("checkpoint does not hold a VAE");
  Vae vae(vae_config_from_json(ckpt.config.at("vae")), 0);
  load_tensors(ckpt, vae.parameters());
  return vae;
}

Checkpoint make_denoiser_checkpoint(const LatentDenoiser& model, double latent_scale, const ScheduleConfig& schedule,
                                    std::uint64_t vae_checksum, const TrainConfig* config) {
  Checkpoint ckpt;
  ckpt.config = {{"kind", "denoiser"},
                 {"unet", to_json(model.config())},
                 {"latent_scale", latent_scale},
                 {"null_seed", model.null_seed()},
                 {"schedule", {{"T", schedule.T}, {"beta_start", schedule.beta_start}, {"beta_end", schedule.beta_end}}},
                 {"vae_checksum", vae_checksum}};
  if (config) ckpt.config["train"] = to_json(*config);
  add_tensors(ckpt, model.parameters());
  return ckpt;
}

DenoiserBundle denoiser_from_checkpoint(const Checkpoint& ckpt) {
  const json& c = ckpt.config;
  if (c.value("kind", "") != "denoiser") throw IncompatibleCheckpointError("checkpoint does not hold a denoiser");
  try {
    DenoiserBundle b{LatentDenoiser(unet_config_from_json(c.at("unet")), 0, c.at("null_seed").get<std::uint64_t>()),
                     c.at("latent_scale").get<double>(),
                     {},
                     c.at("vae_checksum").get<std::uint64_t>()};
    const json& s = c.at("schedule");
    b.schedule = {s.at("T").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>()};
    load_tensors(ckpt, b.model.parameters());
    return b;
  } catch (const json::exception& e) {
    throw IncompatibleCheckpointError(std::string("denoiser checkpoint config is incomplete: ") + e.what());
  }
}

}  // namespace lowlight
