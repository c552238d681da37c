// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lowlight/ops.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng);

struct Conv2d {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  int stride = 1;
  int padding = 1;

  static Conv2d create(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng);
  /// Same geometry, all weights zero.
  static Conv2d zeros(int in_channels, int out_channels, int kernel, int stride, int padding);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  Conv2d clone() const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  static Linear create(int in_features, int out_features, Rng& rng);

  /// x: [rows, in] -> [rows, out]
  Tensor operator()(const Tensor& x) const;
  Linear clone() const;
  void collect(const std::string& prefix, ParamList& out) const;
};

std::vector<Tensor> tensors_of(const ParamList& params);
void set_requires_grad(const ParamList& params, bool flag);
std::size_t parameter_count(const ParamList& params);

}  // namespace lowlight::nn
