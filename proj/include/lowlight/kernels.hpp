// SPDX-License-Identifier: Apache-2.0
#pragma once

// OpenMP-parallel numeric kernels behind the autodiff ops.
//
// Work is split over disjoint output ranges only, and every output element
// accumulates its terms in a fixed order, so results are bitwise identical
// for any thread count. Serial loop versions live in reference_kernels.hpp.

#include <span>

#include "lowlight/scalar.hpp"

namespace lowlight::kernels {

struct GemmDims {
  int m = 0;
  int n = 0;
  int k = 0;
};

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate);
// C[m x n] (+)= A^T * B, with A stored k x m
void gemm_tn(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate);
// C[m x n] (+)= A * B^T, with B stored n x k
void gemm_nt(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate);

struct ConvGeometry {
  int channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  int out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
  int patch_size() const { return channels * kernel * kernel; }
};

// columns[(c*k + ky)*k + kx][oy*ow + ox] = image[c][oy*s - p + ky][ox*s - p + kx]
void im2col(const ConvGeometry& g, std::span<const Scalar> image, std::span<Scalar> columns);
// Adjoint of im2col; accumulates into image.
void col2im(const ConvGeometry& g, std::span<const Scalar> columns, std::span<Scalar> image);

// Row-wise softmax with max subtraction.
void softmax_rows(int rows, int cols, std::span<const Scalar> in, std::span<Scalar> out);

Scalar dot(const Scalar* x, const Scalar* y, int n);

}  // namespace lowlight::kernels
