// SPDX-License-Identifier: Apache-2.0
#pragma once

// Global and region-based cross-attention.
//
// Token tensors are [H*W, d] in raster order. Region attention splits the
// grid into non-overlapping rh x rw windows and lets each query token attend
// only to the condition tokens of its own window; Q/K/V projections are
// shared by all windows.

#include <cstdint>
#include <vector>

#include "lowlight/nn.hpp"

namespace lowlight {

/// Projections map d-dimensional tokens to d_k: Q = z W_Q^T, K = c W_K^T, V = c W_V^T.
struct AttentionWeights {
  Tensor w_q;  // [d_k, d]
  Tensor w_k;  // [d_k, d]
  Tensor w_v;  // [d_k, d]

  static AttentionWeights create(int features, int head_features, Rng& rng);
  int features() const { return w_q.dim(1); }
  int head_features() const { return w_q.dim(0); }
  AttentionWeights clone() const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

/// softmax(Q K^T / sqrt(d_k)), [N x M]
Tensor attention_probabilities(const Tensor& z, const Tensor& c, const AttentionWeights& w);
/// softmax(Q K^T / sqrt(d_k)) V, [N x d_k]
Tensor cross_attention(const Tensor& z, const Tensor& c, const AttentionWeights& w);

struct RegionSpec {
  int height = 2;
  int width = 2;
};

/// Token indices of every region. Regions are numbered in raster order over
/// the region grid; tokens inside a region keep raster order.
struct RegionPartition {
  int height = 0;
  int width = 0;
  RegionSpec spec;
  std::vector<std::vector<int>> regions;
  // inverse[token] = position of the token in the concatenation of regions
  std::vector<int> inverse;

  int count() const { return static_cast<int>(regions.size()); }
};

RegionPartition partition_regions(int height, int width, RegionSpec spec);
std::vector<Tensor> partition(const Tensor& tokens, const RegionPartition& parts);
/// Inverse of partition: scatter(partition(x)) == x bitwise.
Tensor scatter(const std::vector<Tensor>& parts, const RegionPartition& layout);

/// Per-region cross_attention with shared weights, written back in place. [H*W x d_k]
Tensor region_cross_attention(const Tensor& z, const Tensor& c, int height, int width, RegionSpec spec,
                              const AttentionWeights& w);

/// A region larger than the grid collapses to the full extent along that axis.
RegionSpec effective_region(RegionSpec spec, int height, int width);

/// Residual attention block used inside the denoiser:
///     h + W_out * concat_heads(attention(h, cond)) + b_out
/// Cross-attention is region-based when a condition is given; without one,
/// the block is global self-attention.
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(int channels, int heads, Rng& rng);

  /// h, cond: [1, C, H, W]; cond may be undefined for self-attention.
  Tensor operator()(const Tensor& h, const Tensor& cond, RegionSpec spec) const;

  int heads() const { return static_cast<int>(heads_.size()); }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  std::vector<AttentionWeights> heads_;
  std::vector<Tensor> out_proj_;  // per head [C, d_head]
  Tensor out_bias_;               // [C]
};

}  // namespace lowlight
