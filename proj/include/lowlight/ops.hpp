// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operations on Tensor. Image-like tensors are [N, C, H, W]
// (a leading batch dimension) or [C, H, W]; token tensors are [rows, features].

#include <vector>

#include "lowlight/tensor.hpp"

namespace lowlight {

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor scale(const Tensor& x, Scalar factor);
Tensor add_scalar(const Tensor& x, Scalar offset);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor silu(const Tensor& x);
/// Hard clamp; the gradient passes where lo <= x <= hi and is zero elsewhere.
Tensor clamp(const Tensor& x, Scalar lo, Scalar hi);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((a - b)^2)
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);

/// [M x K] * [K x N]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor softmax_rows(const Tensor& x);

/// Cross-correlation with a square kernel. weight: [C_out, C_in, k, k];
/// bias: [C_out] or undefined. Output extent (H + 2p - k) / stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int begin, int end);
/// Adds b[C] (shared by the batch) or b[N, C] (per sample) to every pixel.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);
/// x[R, C] + b[C] on every row.
Tensor add_row_bias(const Tensor& x, const Tensor& b);

/// [C, H, W] or [1, C, H, W] -> [H*W, C], raster order.
Tensor chw_to_tokens(const Tensor& x);
/// [H*W, C] -> [1, C, H, W]
Tensor tokens_to_chw(const Tensor& tokens, int height, int width);

/// Selects rows; the backward pass scatter-adds.
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
Tensor concat_rows(const std::vector<Tensor>& parts);

}  // namespace lowlight
