// SPDX-License-Identifier: Apache-2.0
#pragma once

// Naive serial loop implementations of the parallel kernels. Used only as
// test oracles and as the baseline in the kernel benchmark.

#include <span>

#include "lowlight/kernels.hpp"

namespace lowlight::reference {

// C[m x n] = A[m x k] * B[k x n], triple loop, double accumulation.
void gemm(kernels::GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c);

// Direct six-loop cross-correlation of one image.
// weights: [out_channels][g.channels][k][k]; bias may be empty.
void conv2d(const kernels::ConvGeometry& g, int out_channels, std::span<const Scalar> image,
            std::span<const Scalar> weights, std::span<const Scalar> bias, std::span<Scalar> out);

void softmax_rows(int rows, int cols, std::span<const Scalar> in, std::span<Scalar> out);

}  // namespace lowlight::reference
