// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lowlight/tensor.hpp"

namespace lowlight {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<Scalar> first_moment;
  std::vector<Scalar> second_moment;
  std::int64_t step_count = 0;
};

/// One bias-corrected Adam update in place. Increments step_count first.
void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, AdamState& state, const AdamConfig& config);

struct ParamGroup {
  std::vector<Tensor> params;
  double lr = 1e-3;
};

/// Adam over parameter groups that share betas but carry their own rate.
class Adam {
 public:
  Adam(std::vector<ParamGroup> groups, double beta1, double beta2, double epsilon = 1e-8);

  /// Applies accumulated gradients. Tensors that received no gradient since
  /// the last zero_grad() are left untouched.
  void step();
  void zero_grad();

  const std::vector<ParamGroup>& groups() const { return groups_; }
  const AdamState& state(std::size_t group, std::size_t index) const { return states_[group][index]; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<std::vector<AdamState>> states_;
  double beta1_;
  double beta2_;
  double epsilon_;
};

}  // namespace lowlight
