// SPDX-License-Identifier: Apache-2.0
#include "lowlight/reference_kernels.hpp"

#include <cmath>

namespace lowlight::reference {

void gemm(kernels::GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c) {
  for (int i = 0; i < d.m; ++i)
    for (int j = 0; j < d.n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < d.k; ++p) acc += double(a[std::size_t(i) * d.k + p]) * double(b[std::size_t(p) * d.n + j]);
      c[std::size_t(i) * d.n + j] = static_cast<Scalar>(acc);
    }
}

void conv2d(const kernels::ConvGeometry& g, int out_channels, std::span<const Scalar> image,
            std::span<const Scalar> weights, std::span<const Scalar> bias, std::span<Scalar> out) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int k = g.kernel;
  for (int co = 0; co < out_channels; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias.empty() ? 0.0 : double(bias[co]);
        for (int ci = 0; ci < g.channels; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * g.stride - g.padding + ky;
              const int ix = ox * g.stride - g.padding + kx;
              if (iy < 0 || iy >= g.height || ix < 0 || ix >= g.width) continue;
              acc += double(weights[((std::size_t(co) * g.channels + ci) * k + ky) * k + kx]) *
                     double(image[(std::size_t(ci) * g.height + iy) * g.width + ix]);
            }
        out[(std::size_t(co) * oh + oy) * ow + ox] = static_cast<Scalar>(acc);
      }
}

void softmax_rows(int rows, int cols, std::span<const Scalar> in, std::span<Scalar> out) {
  for (int r = 0; r < rows; ++r) {
    double mx = in[std::size_t(r) * cols];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, double(in[std::size_t(r) * cols + j]));
    double total = 0.0;
    for (int j = 0; j < cols; ++j) total += std::exp(double(in[std::size_t(r) * cols + j]) - mx);
    for (int j = 0; j < cols; ++j)
      out[std::size_t(r) * cols + j] = static_cast<Scalar>(std::exp(double(in[std::size_t(r) * cols + j]) - mx) / total);
  }
}

}  // namespace lowlight::reference
