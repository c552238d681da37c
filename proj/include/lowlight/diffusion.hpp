// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "lowlight/denoiser.hpp"
#include "lowlight/vae.hpp"

namespace lowlight {

/// Discrete DDPM schedule. Vectors are indexed by t in [0, T]; index 0 holds
/// the clean state (beta = 0, alpha = alpha_bar = 1, sigma = 0).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;

  /// betas[0] is beta_1. Every beta must lie in (0, 1).
  static NoiseSchedule from_betas(const std::vector<double>& betas);
  void check_step(int t) const;
  /// Columns t, beta, alpha, alpha_bar, sigma for t = 1..T.
  void write_csv(std::ostream& out) const;
};

NoiseSchedule make_linear_schedule(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

/// Noise predictor: (z_t, t, cond) -> eps_hat; cond == nullptr means unconditional.
using NoiseModel = std::function<Tensor(const Tensor&, int, const ContextFeatures*)>;
NoiseModel as_noise_model(const LatentDenoiser& model);

/// sqrt(abar_t) z0 + sqrt(1 - abar_t) noise
Tensor q_sample(const NoiseSchedule& s, const Tensor& z0, int t, const Tensor& noise);

/// (z_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t). Differentiable in eps_hat and z_t.
Tensor one_step_z0(const NoiseSchedule& s, const Tensor& z_t, int t, const Tensor& eps_hat);

struct LdmTerms {
  Tensor loss;     // mean (eps_hat - noise)^2
  Tensor z_t;
  Tensor noise;
  Tensor eps_hat;
};

LdmTerms ldm_terms(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z0, const ContextFeatures* cond,
                   int t, Rng& rng);
inline Tensor ldm_loss(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z0, const ContextFeatures* cond,
                       int t, Rng& rng) {
  return ldm_terms(model, s, z0, cond, t, rng).loss;
}

/// mean (x_clean - D(z_hat0 / latent_scale, skips))^2. The decoder's weights
/// are expected to be frozen by the caller; gradients still flow to z_hat0.
Tensor image_loss(const Vae& decoder, const Tensor& z_hat0, std::span<const Tensor> skips, const Tensor& x_clean,
                  double latent_scale = 1.0);

/// L_ldm + lambda * L_image
Tensor combined_loss(const Tensor& ldm, const Tensor& image, double lambda);

struct GuidanceConfig {
  double omega = 2.0;
  void validate() const;
};

/// uncond_hat + omega * (cond_hat - uncond_hat). `uncond` may be null to let
/// the model choose its null condition.
Tensor cfg_predict(const NoiseModel& model, const Tensor& z_t, int t, const ContextFeatures* cond,
                   const ContextFeatures* uncond, const GuidanceConfig& guidance);
/// The same affine combination of two already computed predictions.
Tensor cfg_combine(const Tensor& cond_hat, const Tensor& uncond_hat, double omega);

/// (z_t - (1 - alpha_t) / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t noise
Tensor ancestral_update(const NoiseSchedule& s, const Tensor& z_t, int t, const Tensor& eps_hat, const Tensor& noise);

/// One reverse step; no noise is added at t = 1.
Tensor ancestral_step(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z_t, int t,
                      const ContextFeatures* cond, const ContextFeatures* uncond, const GuidanceConfig& guidance,
                      Rng& rng);

/// DDIM (eta = 0) timesteps T = t_0 > t_1 > ... > t_{steps-1}, t_i = T - floor(i T / steps).
std::vector<int> ddim_timesteps(int T, int steps);

/// sqrt(abar_prev) z0_hat + sqrt(1 - abar_prev) eps_hat
Tensor ddim_update(const NoiseSchedule& s, const Tensor& z_t, int t, int t_prev, const Tensor& eps_hat);

struct SampleResult {
  Tensor z0;
  std::vector<Tensor> trajectory;  // z_T first, filled only when requested
};

SampleResult ddim_sample_from(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z_T,
                              const ContextFeatures* cond, const ContextFeatures* uncond, int steps,
                              const GuidanceConfig& guidance, bool keep_trajectory = false);
/// Draws z_T ~ N(0, I) of `shape` from rng, then runs ddim_sample_from.
SampleResult ddim_sample(const NoiseModel& model, const NoiseSchedule& s, const Shape& shape,
                         const ContextFeatures* cond, const ContextFeatures* uncond, int steps,
                         const GuidanceConfig& guidance, Rng& rng, bool keep_trajectory = false);
/// Full T-step ancestral sampling.
SampleResult ancestral_sample(const NoiseModel& model, const NoiseSchedule& s, const Shape& shape,
                              const ContextFeatures* cond, const ContextFeatures* uncond,
                              const GuidanceConfig& guidance, Rng& rng);

}  // namespace lowlight
