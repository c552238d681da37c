// SPDX-License-Identifier: Apache-2.0
#include "lowlight/diffusion.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "lowlight/errors.hpp"

namespace lowlight {

NoiseSchedule NoiseSchedule::from_betas(const std::vector<double>& betas) {
  if (betas.empty()) throw ConfigError("noise schedule: at least one step is required");
  NoiseSchedule s;
  s.T = static_cast<int>(betas.size());
  s.beta.assign(1, 0.0);
  s.alpha.assign(1, 1.0);
  s.alpha_bar.assign(1, 1.0);
  s.sigma.assign(1, 0.0);
  for (double b : betas) {
    if (!(b > 0.0 && b < 1.0)) throw ConfigError("noise schedule: beta values must lie in (0, 1)");
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    s.alpha_bar.push_back(s.alpha_bar.back() * (1.0 - b));
    s.sigma.push_back(std::sqrt(b));
  }
  return s;
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > T) throw RangeError("diffusion step t=" + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

void NoiseSchedule::write_csv(std::ostream& out) const {
  out << "t,beta,alpha,alpha_bar,sigma\n" << std::setprecision(17);
  for (int t = 1; t <= T; ++t)
    out << t << ',' << beta[t] << ',' << alpha[t] << ',' << alpha_bar[t] << ',' << sigma[t] << '\n';
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("linear schedule: T must be positive");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("linear schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(T);
  for (int i = 0; i < T; ++i)
    betas[i] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (T - 1);
  return NoiseSchedule::from_betas(betas);
}

NoiseModel as_noise_model(const LatentDenoiser& model) {
  return [&model](const Tensor& z, int t, const ContextFeatures* cond) { return model.predict_noise(z, t, cond); };
}

Tensor q_sample(const NoiseSchedule& s, const Tensor& z0, int t, const Tensor& noise) {
  s.check_step(t);
  if (z0.shape() != noise.shape())
    throw ShapeError("q_sample: latent " + to_string(z0.shape()) + " vs noise " + to_string(noise.shape()));
  const double ab = s.alpha_bar[t];
  return add(scale(z0, static_cast<Scalar>(std::sqrt(ab))), scale(noise, static_cast<Scalar>(std::sqrt(1.0 - ab))));
}

Tensor one_step_z0(const NoiseSchedule& s, const Tensor& z_t, int t, const Tensor& eps_hat) {
  s.check_step(t);
  const double ab = s.alpha_bar[t];
  if (!(ab > 0.0)) throw NumericError("one_step_z0: alpha_bar is zero at t=" + std::to_string(t));
  if (z_t.shape() != eps_hat.shape())
    throw ShapeError("one_step_z0: latent " + to_string(z_t.shape()) + " vs prediction " + to_string(eps_hat.shape()));
  Tensor numerator = sub(z_t, scale(eps_hat, static_cast<Scalar>(std::sqrt(1.0 - ab))));
  return scale(numerator, static_cast<Scalar>(1.0 / std::sqrt(ab)));
}

LdmTerms ldm_terms(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z0, const ContextFeatures* cond,
                   int t, Rng& rng) {
  s.check_step(t);
  LdmTerms out;
  out.noise = gaussian_tensor(z0.shape(), rng);
  out.z_t = q_sample(s, z0, t, out.noise);
  out.eps_hat = model(out.z_t, t, cond);
  out.loss = mse(out.eps_hat, out.noise);
  return out;
}

Tensor image_loss(const Vae& decoder, const Tensor& z_hat0, std::span<const Tensor> skips, const Tensor& x_clean,
                  double latent_scale) {
  if (!(latent_scale > 0.0)) throw ConfigError("image_loss: latent scale must be positive");
  Tensor z = latent_scale == 1.0 ? z_hat0 : scale(z_hat0, static_cast<Scalar>(1.0 / latent_scale));
  Tensor decoded = decoder.decode(z, skips);
  if (decoded.shape() != x_clean.shape())
    throw ShapeError("image_loss: decoded " + to_string(decoded.shape()) + " vs target " + to_string(x_clean.shape()));
  return mse(decoded, x_clean);
}

Tensor combined_loss(const Tensor& ldm, const Tensor& image, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("combined_loss: lambda must be >= 0");
  if (lambda == 0.0 || !image.defined()) return ldm;
  return add(ldm, scale(image, static_cast<Scalar>(lambda)));
}

void GuidanceConfig::validate() const {
  if (!(omega >= 0.0)) throw ConfigError("guidance: omega must be >= 0");
}

Tensor cfg_combine(const Tensor& cond_hat, const Tensor& uncond_hat, double omega) {
  if (cond_hat.shape() != uncond_hat.shape())
    throw ShapeError("cfg: branch shapes differ: " + to_string(cond_hat.shape()) + " vs " + to_string(uncond_hat.shape()));
  if (omega == 1.0) return cond_hat;
  if (omega == 0.0) return uncond_hat;
  std::vector<Scalar> out(cond_hat.size());
  auto c = cond_hat.data(), u = uncond_hat.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<Scalar>(double(u[i]) + omega * (double(c[i]) - double(u[i])));
  return Tensor::from_data(cond_hat.shape(), std::move(out));
}

Tensor cfg_predict(const NoiseModel& model, const Tensor& z_t, int t, const ContextFeatures* cond,
                   const ContextFeatures* uncond, const GuidanceConfig& guidance) {
  guidance.validate();
  if (!cond) return model(z_t, t, uncond);
  if (guidance.omega == 1.0) return model(z_t, t, cond);
  Tensor u = model(z_t, t, uncond);
  if (guidance.omega == 0.0) return u;
  return cfg_combine(model(z_t, t, cond), u, guidance.omega);
}

Tensor ancestral_update(const NoiseSchedule& s, const Tensor& z_t, int t, const Tensor& eps_hat, const Tensor& noise) {
  s.check_step(t);
  const double coef = (1.0 - s.alpha[t]) / std::sqrt(1.0 - s.alpha_bar[t]);
  Tensor mean = scale(sub(z_t, scale(eps_hat, static_cast<Scalar>(coef))), static_cast<Scalar>(1.0 / std::sqrt(s.alpha[t])));
  if (!noise.defined() || s.sigma[t] == 0.0) return mean;
  return add(mean, scale(noise, static_cast<Scalar>(s.sigma[t])));
}

Tensor ancestral_step(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z_t, int t,
                      const ContextFeatures* cond, const ContextFeatures* uncond, const GuidanceConfig& guidance,
                      Rng& rng) {
  s.check_step(t);
  NoGradGuard no_grad;
  Tensor eps = cfg_predict(model, z_t, t, cond, uncond, guidance);
  Tensor noise = t > 1 ? gaussian_tensor(z_t.shape(), rng) : Tensor{};
  return ancestral_update(s, z_t, t, eps, noise);
}

std::vector<int> ddim_timesteps(int T, int steps) {
  if (steps < 1 || steps > T)
    throw ConfigError("ddim: steps must lie in [1, " + std::to_string(T) + "], got " + std::to_string(steps));
  std::vector<int> out(steps);
  for (int i = 0; i < steps; ++i)
    out[i] = T - static_cast<int>((static_cast<long long>(i) * T) / steps);
  return out;
}

Tensor ddim_update(const NoiseSchedule& s, const Tensor& z_t, int t, int t_prev, const Tensor& eps_hat) {
  if (t_prev < 0 || t_prev >= t) throw RangeError("ddim: previous step must lie in [0, t)");
  Tensor z0 = one_step_z0(s, z_t, t, eps_hat);
  const double ab_prev = s.alpha_bar[t_prev];
  if (ab_prev == 1.0) return z0;
  return add(scale(z0, static_cast<Scalar>(std::sqrt(ab_prev))),
             scale(eps_hat, static_cast<Scalar>(std::sqrt(1.0 - ab_prev))));
}

SampleResult ddim_sample_from(const NoiseModel& model, const NoiseSchedule& s, const Tensor& z_T,
                              const ContextFeatures* cond, const ContextFeatures* uncond, int steps,
                              const GuidanceConfig& guidance, bool keep_trajectory) {
  guidance.validate();
  const std::vector<int> ts = ddim_timesteps(s.T, steps);
  NoGradGuard no_grad;
  SampleResult out;
  Tensor z = z_T.detach();
  if (keep_trajectory) out.trajectory.push_back(z);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    Tensor eps = cfg_predict(model, z, t, cond, uncond, guidance);
    z = ddim_update(s, z, t, t_prev, eps);
    if (keep_trajectory) out.trajectory.push_back(z);
  }
  out.z0 = z;
  return out;
}

SampleResult ddim_sample(const NoiseModel& model, const NoiseSchedule& s, const Shape& shape,
                         const ContextFeatures* cond, const ContextFeatures* uncond, int steps,
                         const GuidanceConfig& guidance, Rng& rng, bool keep_trajectory) {
  Tensor z_T = gaussian_tensor(shape, rng);
  return ddim_sample_from(model, s, z_T, cond, uncond, steps, guidance, keep_trajectory);
}

SampleResult ancestral_sample(const NoiseModel& model, const NoiseSchedule& s, const Shape& shape,
                              const ContextFeatures* cond, const ContextFeatures* uncond,
                              const GuidanceConfig& guidance, Rng& rng) {
  guidance.validate();
  SampleResult out;
  Tensor z = gaussian_tensor(shape, rng);
  for (int t = s.T; t >= 1; --t) z = ancestral_step(model, s, z, t, cond, uncond, guidance, rng);
  out.z0 = z;
  return out;
}

}  // namespace lowlight
