// SPDX-License-Identifier: Apache-2.0
#include "lowlight/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lowlight/errors.hpp"

namespace lowlight::kernels {

namespace {
constexpr int kColumnBlock = 256;

void check_sizes(GemmDims d, std::size_t a, std::size_t b, std::size_t c, std::size_t want_a, std::size_t want_b) {
  if (a < want_a || b < want_b || c < static_cast<std::size_t>(d.m) * d.n)
    throw ShapeError("gemm: buffer smaller than declared dimensions");
}
}  // namespace

Scalar dot(const Scalar* x, const Scalar* y, int n) {
  Scalar acc[8] = {};
  int j = 0;
  for (; j + 8 <= n; j += 8)
    for (int l = 0; l < 8; ++l) acc[l] += x[j + l] * y[j + l];
  Scalar s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; j < n; ++j) s += x[j] * y[j];
  return s;
}

void gemm_nn(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate) {
  check_sizes(d, a.size(), b.size(), c.size(), std::size_t(d.m) * d.k, std::size_t(d.k) * d.n);
  const int blocks = (d.n + kColumnBlock - 1) / kColumnBlock;
  const Scalar* A = a.data();
  const Scalar* B = b.data();
  Scalar* C = c.data();
#pragma omp parallel for schedule(static) if (std::size_t(d.m) * d.n * d.k > 32768)
  for (int blk = 0; blk < blocks; ++blk) {
    const int j0 = blk * kColumnBlock;
    const int j1 = std::min(d.n, j0 + kColumnBlock);
    for (int i = 0; i < d.m; ++i) {
      Scalar* crow = C + std::size_t(i) * d.n;
      if (!accumulate) std::fill(crow + j0, crow + j1, Scalar(0));
      const Scalar* arow = A + std::size_t(i) * d.k;
      for (int p = 0; p < d.k; ++p) {
        const Scalar av = arow[p];
        const Scalar* brow = B + std::size_t(p) * d.n;
        for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void gemm_tn(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate) {
  check_sizes(d, a.size(), b.size(), c.size(), std::size_t(d.m) * d.k, std::size_t(d.k) * d.n);
  const int blocks = (d.n + kColumnBlock - 1) / kColumnBlock;
  const Scalar* A = a.data();
  const Scalar* B = b.data();
  Scalar* C = c.data();
#pragma omp parallel for schedule(static) if (std::size_t(d.m) * d.n * d.k > 32768)
  for (int blk = 0; blk < blocks; ++blk) {
    const int j0 = blk * kColumnBlock;
    const int j1 = std::min(d.n, j0 + kColumnBlock);
    if (!accumulate)
      for (int i = 0; i < d.m; ++i) std::fill(C + std::size_t(i) * d.n + j0, C + std::size_t(i) * d.n + j1, Scalar(0));
    for (int p = 0; p < d.k; ++p) {
      const Scalar* arow = A + std::size_t(p) * d.m;
      const Scalar* brow = B + std::size_t(p) * d.n;
      for (int i = 0; i < d.m; ++i) {
        const Scalar av = arow[i];
        Scalar* crow = C + std::size_t(i) * d.n;
        for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void gemm_nt(GemmDims d, std::span<const Scalar> a, std::span<const Scalar> b, std::span<Scalar> c,
             bool accumulate) {
  check_sizes(d, a.size(), b.size(), c.size(), std::size_t(d.m) * d.k, std::size_t(d.n) * d.k);
  const Scalar* A = a.data();
  const Scalar* B = b.data();
  Scalar* C = c.data();
#pragma omp parallel for schedule(static) if (std::size_t(d.m) * d.n * d.k > 32768)
  for (int i = 0; i < d.m; ++i) {
    const Scalar* arow = A + std::size_t(i) * d.k;
    Scalar* crow = C + std::size_t(i) * d.n;
    for (int j = 0; j < d.n; ++j) {
      const Scalar v = dot(arow, B + std::size_t(j) * d.k, d.k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

void im2col(const ConvGeometry& g, std::span<const Scalar> image, std::span<Scalar> columns) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int k = g.kernel;
  const std::size_t plane = std::size_t(oh) * ow;
  if (columns.size() < plane * g.patch_size() || image.size() < std::size_t(g.channels) * g.height * g.width)
    throw ShapeError("im2col: buffer too small");
  const Scalar* img = image.data();
  Scalar* col = columns.data();
#pragma omp parallel for schedule(static) if (plane * g.patch_size() > 65536)
  for (int row = 0; row < g.patch_size(); ++row) {
    const int c = row / (k * k);
    const int ky = (row / k) % k;
    const int kx = row % k;
    Scalar* dst = col + std::size_t(row) * plane;
    const Scalar* src = img + std::size_t(c) * g.height * g.width;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * g.stride - g.padding + ky;
      Scalar* drow = dst + std::size_t(oy) * ow;
      if (iy < 0 || iy >= g.height) {
        std::fill(drow, drow + ow, Scalar(0));
        continue;
      }
      const Scalar* srow = src + std::size_t(iy) * g.width;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * g.stride - g.padding + kx;
        drow[ox] = (ix >= 0 && ix < g.width) ? srow[ix] : Scalar(0);
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::span<const Scalar> columns, std::span<Scalar> image) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int k = g.kernel;
  const std::size_t plane = std::size_t(oh) * ow;
  if (columns.size() < plane * g.patch_size() || image.size() < std::size_t(g.channels) * g.height * g.width)
    throw ShapeError("col2im: buffer too small");
  const Scalar* col = columns.data();
  Scalar* img = image.data();
  // Channels own disjoint image planes; kernel offsets accumulate in fixed order.
#pragma omp parallel for schedule(static) if (plane * g.patch_size() > 65536)
  for (int c = 0; c < g.channels; ++c) {
    Scalar* dst = img + std::size_t(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = col + std::size_t((c * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          Scalar* drow = dst + std::size_t(iy) * g.width;
          const Scalar* srow = src + std::size_t(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void softmax_rows(int rows, int cols, std::span<const Scalar> in, std::span<Scalar> out) {
  if (in.size() < std::size_t(rows) * cols || out.size() < std::size_t(rows) * cols)
    throw ShapeError("softmax_rows: buffer too small");
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad) if (std::size_t(rows) * cols > 16384)
  for (int r = 0; r < rows; ++r) {
    const Scalar* x = in.data() + std::size_t(r) * cols;
    Scalar* y = out.data() + std::size_t(r) * cols;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (int j = 0; j < cols; ++j) {
      if (std::isnan(x[j])) bad = true;
      mx = std::max(mx, x[j]);
    }
    Scalar total = 0;
    for (int j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    const Scalar inv = Scalar(1) / total;
    for (int j = 0; j < cols; ++j) y[j] *= inv;
  }
  if (bad) throw NumericError("softmax_rows: NaN in input");
}

}  // namespace lowlight::kernels
