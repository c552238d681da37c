// SPDX-License-Identifier: Apache-2.0
#include "lowlight/optim.hpp"

#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
}

void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, AdamState& state, const AdamConfig& config) {
  config.validate();
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient and parameter sizes differ");
  if (state.first_moment.empty()) {
    state.first_moment.assign(params.size(), Scalar(0));
    state.second_moment.assign(params.size(), Scalar(0));
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ShapeError("adam_step: moment buffers do not match parameter size");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto step = static_cast<Scalar>(config.lr / correction1);
  const auto inv_sqrt_c2 = static_cast<Scalar>(1.0 / std::sqrt(correction2));
  const auto eps = static_cast<Scalar>(config.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Scalar g = grads[i];
    Scalar& m = state.first_moment[i];
    Scalar& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g * g;
    params[i] -= step * m / (std::sqrt(v) * inv_sqrt_c2 + eps);
  }
}

Adam::Adam(std::vector<ParamGroup> groups, double beta1, double beta2, double epsilon)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  states_.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    AdamConfig{groups_[g].lr, beta1_, beta2_, epsilon_}.validate();
    states_[g].resize(groups_[g].params.size());
  }
}

void Adam::step() {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const AdamConfig config{groups_[g].lr, beta1_, beta2_, epsilon_};
    for (std::size_t i = 0; i < groups_[g].params.size(); ++i) {
      const Tensor& p = groups_[g].params[i];
      if (p.has_grad()) adam_step(p.mutable_data(), p.grad(), states_[g][i], config);
    }
  }
}

void Adam::zero_grad() {
  for (auto& group : groups_)
    for (auto& p : group.params) p.zero_grad();
}

}  // namespace lowlight
