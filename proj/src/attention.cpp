// SPDX-License-Identifier: Apache-2.0
#include "lowlight/attention.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/errors.hpp"

namespace lowlight {

AttentionWeights AttentionWeights::create(int features, int head_features, Rng& rng) {
  return {nn::fan_in_uniform({head_features, features}, features, rng),
          nn::fan_in_uniform({head_features, features}, features, rng),
          nn::fan_in_uniform({head_features, features}, features, rng)};
}

AttentionWeights AttentionWeights::clone() const { return {w_q.clone(true), w_k.clone(true), w_v.clone(true)}; }

void AttentionWeights::collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".w_q", w_q});
  out.push_back({prefix + ".w_k", w_k});
  out.push_back({prefix + ".w_v", w_v});
}

namespace {
void check_tokens(const Tensor& z, const Tensor& c, const AttentionWeights& w) {
  if (z.ndim() != 2 || c.ndim() != 2)
    throw ShapeError("attention: tokens must be 2-D, got " + to_string(z.shape()) + " and " + to_string(c.shape()));
  if (z.dim(1) != w.features() || c.dim(1) != w.features())
    throw ShapeError("attention: token features " + to_string(z.shape()) + " / " + to_string(c.shape()) +
                     " do not match projection " + to_string(w.w_q.shape()));
}
}  // namespace

Tensor attention_probabilities(const Tensor& z, const Tensor& c, const AttentionWeights& w) {
  check_tokens(z, c, w);
  Tensor q = matmul(z, transpose(w.w_q));
  Tensor k = matmul(c, transpose(w.w_k));
  const auto inv_sqrt_dk = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(w.head_features())));
  return softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dk));
}

Tensor cross_attention(const Tensor& z, const Tensor& c, const AttentionWeights& w) {
  Tensor a = attention_probabilities(z, c, w);
  Tensor v = matmul(c, transpose(w.w_v));
  return matmul(a, v);
}

RegionPartition partition_regions(int height, int width, RegionSpec spec) {
  if (height < 1 || width < 1 || spec.height < 1 || spec.width < 1)
    throw ShapeError("partition_regions: extents and region size must be positive");
  if (height % spec.height != 0 || width % spec.width != 0)
    throw ShapeError("partition_regions: " + std::to_string(height) + "x" + std::to_string(width) +
                     " grid is not divisible into " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                     " regions");
  RegionPartition out{height, width, spec, {}, std::vector<int>(std::size_t(height) * width)};
  int position = 0;
  for (int ry = 0; ry < height / spec.height; ++ry)
    for (int rx = 0; rx < width / spec.width; ++rx) {
      std::vector<int> tokens;
      tokens.reserve(std::size_t(spec.height) * spec.width);
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const int token = (ry * spec.height + y) * width + rx * spec.width + x;
          tokens.push_back(token);
          out.inverse[token] = position++;
        }
      out.regions.push_back(std::move(tokens));
    }
  return out;
}

std::vector<Tensor> partition(const Tensor& tokens, const RegionPartition& parts) {
  if (tokens.ndim() != 2 || tokens.dim(0) != parts.height * parts.width)
    throw ShapeError("partition: tokens " + to_string(tokens.shape()) + " do not cover a " +
                     std::to_string(parts.height) + "x" + std::to_string(parts.width) + " grid");
  std::vector<Tensor> out;
  out.reserve(parts.regions.size());
  for (const auto& region : parts.regions) out.push_back(gather_rows(tokens, region));
  return out;
}

Tensor scatter(const std::vector<Tensor>& parts, const RegionPartition& layout) {
  if (static_cast<int>(parts.size()) != layout.count())
    throw ShapeError("scatter: expected " + std::to_string(layout.count()) + " regions, got " +
                     std::to_string(parts.size()));
  if (parts.size() == 1) return parts.front();
  return gather_rows(concat_rows(parts), layout.inverse);
}

RegionSpec effective_region(RegionSpec spec, int height, int width) {
  return {std::min(spec.height, height), std::min(spec.width, width)};
}

Tensor region_cross_attention(const Tensor& z, const Tensor& c, int height, int width, RegionSpec spec,
                              const AttentionWeights& w) {
  if (z.shape() != c.shape())
    throw ShapeError("region_cross_attention: latent " + to_string(z.shape()) + " and condition " +
                     to_string(c.shape()) + " differ");
  check_tokens(z, c, w);
  const RegionPartition layout = partition_regions(height, width, spec);
  if (layout.count() == 1) return cross_attention(z, c, w);
  std::vector<Tensor> zs = partition(z, layout);
  std::vector<Tensor> cs = partition(c, layout);
  std::vector<Tensor> outs;
  outs.reserve(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) outs.push_back(cross_attention(zs[i], cs[i], w));
  return scatter(outs, layout);
}

AttentionBlock::AttentionBlock(int channels, int heads, Rng& rng) {
  if (heads < 1 || channels % heads != 0)
    throw ConfigError("attention block: " + std::to_string(channels) + " channels cannot be split into " +
                      std::to_string(heads) + " heads");
  const int head_features = channels / heads;
  for (int i = 0; i < heads; ++i) {
    heads_.push_back(AttentionWeights::create(channels, head_features, rng));
    out_proj_.push_back(nn::fan_in_uniform({channels, head_features}, channels, rng));
  }
  out_bias_ = Tensor::zeros({channels}, true);
}

Tensor AttentionBlock::operator()(const Tensor& h, const Tensor& cond, RegionSpec spec) const {
  if (h.ndim() != 4 || h.dim(0) != 1) throw ShapeError("attention block: expects [1,C,H,W], got " + to_string(h.shape()));
  const int height = h.dim(2), width = h.dim(3);
  Tensor tokens = chw_to_tokens(h);
  Tensor context = cond.defined() ? chw_to_tokens(cond) : tokens;
  const RegionSpec region = cond.defined() ? effective_region(spec, height, width) : RegionSpec{height, width};
  Tensor mixed;
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    Tensor head = region_cross_attention(tokens, context, height, width, region, heads_[i]);
    Tensor projected = matmul(head, transpose(out_proj_[i]));
    mixed = mixed.defined() ? add(mixed, projected) : projected;
  }
  return add(h, tokens_to_chw(add_row_bias(mixed, out_bias_), height, width));
}

void AttentionBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    heads_[i].collect(prefix + ".head" + std::to_string(i), out);
    out.push_back({prefix + ".head" + std::to_string(i) + ".w_out", out_proj_[i]});
  }
  out.push_back({prefix + ".b_out", out_bias_});
}

}  // namespace lowlight
