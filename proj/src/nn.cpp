// SPDX-License-Identifier: Apache-2.0
#include "lowlight/nn.hpp"

#include <cmath>

namespace lowlight::nn {

Tensor fan_in_uniform(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<Scalar> values(numel(shape));
  for (auto& v : values) v = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
  return Tensor::from_data(std::move(shape), std::move(values), true);
}

Conv2d Conv2d::create(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng) {
  const int fan_in = in_channels * kernel * kernel;
  return {fan_in_uniform({out_channels, in_channels, kernel, kernel}, fan_in, rng),
          fan_in_uniform({out_channels}, fan_in, rng), stride, padding};
}

Conv2d Conv2d::zeros(int in_channels, int out_channels, int kernel, int stride, int padding) {
  return {Tensor::zeros({out_channels, in_channels, kernel, kernel}, true), Tensor::zeros({out_channels}, true), stride,
          padding};
}

Conv2d Conv2d::clone() const { return {weight.clone(true), bias.clone(true), stride, padding}; }

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear Linear::create(int in_features, int out_features, Rng& rng) {
  return {fan_in_uniform({out_features, in_features}, in_features, rng),
          fan_in_uniform({out_features}, in_features, rng)};
}

Tensor Linear::operator()(const Tensor& x) const { return add_row_bias(matmul(x, transpose(weight)), bias); }

Linear Linear::clone() const { return {weight.clone(true), bias.clone(true)}; }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

void set_requires_grad(const ParamList& params, bool flag) {
  for (const auto& p : params) p.tensor.set_requires_grad(flag);
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace lowlight::nn
