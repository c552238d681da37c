// SPDX-License-Identifier: Apache-2.0
#include "lowlight/ops.hpp"

#include <algorithm>
#include <cmath>

#include "lowlight/errors.hpp"
#include "lowlight/kernels.hpp"

namespace lowlight {

namespace {

using detail::Node;

struct ImageDims {
  int n = 1;
  int c = 0;
  int h = 0;
  int w = 0;
  bool batched = false;

  std::size_t plane() const { return std::size_t(h) * w; }
  std::size_t sample() const { return std::size_t(c) * h * w; }
  Shape shape_with_channels(int channels) const {
    return batched ? Shape{n, channels, h, w} : Shape{channels, h, w};
  }
};

ImageDims image_dims(const Tensor& x, const char* op) {
  const Shape& s = x.shape();
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  throw ShapeError(std::string(op) + ": expected [N,C,H,W] or [C,H,W], got " + to_string(s));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void require_rank(const Tensor& x, int rank, const char* op) {
  if (x.ndim() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(x.shape()));
}

template <class F>
Tensor unary(const Tensor& x, F forward, std::function<void(Node&)> backward) {
  std::vector<Scalar> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return Tensor::make(x.shape(), std::move(out), {x}, std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<Scalar> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *o.parents[k];
      if (!p.requires_grad) continue;
      Scalar* g = p.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<Scalar> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *o.parents[k];
      if (!p.requires_grad) continue;
      Scalar* g = p.grad_buffer();
      const Scalar sign = k == 0 ? Scalar(1) : Scalar(-1);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += sign * o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<Scalar> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      Scalar* g = pa.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      Scalar* g = pb.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& x, Scalar factor) {
  return unary(x, [factor](Scalar v) { return v * factor; }, [factor](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += factor * o.grad[i];
  });
}

Tensor add_scalar(const Tensor& x, Scalar offset) {
  return unary(x, [offset](Scalar v) { return v + offset; }, [](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](Scalar v) { return std::exp(v); }, [](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * o.data[i];
  });
}

Tensor log(const Tensor& x) {
  return unary(x, [](Scalar v) { return std::log(v); }, [](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / p.data[i];
  });
}

Tensor square(const Tensor& x) {
  return unary(x, [](Scalar v) { return v * v; }, [](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += Scalar(2) * p.data[i] * o.grad[i];
  });
}

Tensor silu(const Tensor& x) {
  return unary(x, [](Scalar v) { return v / (Scalar(1) + std::exp(-v)); }, [](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const Scalar v = p.data[i];
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-v));
      g[i] += o.grad[i] * s * (Scalar(1) + v * (Scalar(1) - s));
    }
  });
}

Tensor clamp(const Tensor& x, Scalar lo, Scalar hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lo must not exceed hi");
  return unary(x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); }, [lo, hi](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (p.data[i] >= lo && p.data[i] <= hi) g[i] += o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  return Tensor::make({1}, {total}, {x}, [](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < p.data.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  const Scalar inv = Scalar(1) / static_cast<Scalar>(x.size());
  Scalar total = 0;
  for (Scalar v : x.data()) total += v;
  return Tensor::make({1}, {total * inv}, {x}, [inv](Node& o) {
    Node& p = *o.parents[0];
    Scalar* g = p.grad_buffer();
    for (std::size_t i = 0; i < p.data.size(); ++i) g[i] += o.grad[0] * inv;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) throw ShapeError("mse of empty tensors");
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.size());
  Scalar total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Scalar d = a.data()[i] - b.data()[i];
    total += d * d;
  }
  return Tensor::make({1}, {total * inv}, {a, b}, [inv](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    const Scalar k = Scalar(2) * inv * o.grad[0];
    Scalar* ga = pa.requires_grad ? pa.grad_buffer() : nullptr;
    Scalar* gb = pb.requires_grad ? pb.grad_buffer() : nullptr;
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      const Scalar d = k * (pa.data[i] - pb.data[i]);
      if (ga) ga[i] += d;
      if (gb) gb[i] -= d;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<Scalar> out(x.data().begin(), x.data().end());
  return Tensor::make(std::move(shape), std::move(out), {x}, [](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " + to_string(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<Scalar> out(std::size_t(m) * n);
  kernels::gemm_nn({m, n, k}, a.data(), b.data(), out, false);
  return Tensor::make({m, n}, std::move(out), {a, b}, [m, n, k](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad)
      kernels::gemm_nt({m, k, n}, o.grad, pb.data, std::span<Scalar>(pa.grad_buffer(), pa.data.size()), true);
    if (pb.requires_grad)
      kernels::gemm_tn({k, n, m}, pa.data, o.grad, std::span<Scalar>(pb.grad_buffer(), pb.data.size()), true);
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const int r = x.dim(0), c = x.dim(1);
  std::vector<Scalar> out(x.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[std::size_t(j) * r + i] = x.data()[std::size_t(i) * c + j];
  return Tensor::make({c, r}, std::move(out), {x}, [r, c](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) g[std::size_t(i) * c + j] += o.grad[std::size_t(j) * r + i];
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const int rows = x.dim(0), cols = x.dim(1);
  std::vector<Scalar> out(x.size());
  kernels::softmax_rows(rows, cols, x.data(), out);
  return Tensor::make(x.shape(), std::move(out), {x}, [rows, cols](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (int r = 0; r < rows; ++r) {
      const Scalar* y = o.data.data() + std::size_t(r) * cols;
      const Scalar* dy = o.grad.data() + std::size_t(r) * cols;
      Scalar inner = 0;
      for (int j = 0; j < cols; ++j) inner += dy[j] * y[j];
      Scalar* gx = g + std::size_t(r) * cols;
      for (int j = 0; j < cols; ++j) gx[j] += y[j] * (dy[j] - inner);
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  const ImageDims d = image_dims(x, "conv2d");
  if (weight.ndim() != 4 || weight.dim(2) != weight.dim(3))
    throw ShapeError("conv2d: weight must be [C_out, C_in, k, k], got " + to_string(weight.shape()));
  if (weight.dim(1) != d.c)
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " does not match weight " + to_string(weight.shape()));
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
  const int out_c = weight.dim(0);
  const int k = weight.dim(2);
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != out_c))
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match " + std::to_string(out_c) + " outputs");
  if (k > d.h + 2 * padding || k > d.w + 2 * padding)
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded input " + to_string(x.shape()));
  if ((d.h + 2 * padding - k) % stride != 0 || (d.w + 2 * padding - k) % stride != 0)
    throw ShapeError("conv2d: non-integral output extent for input " + to_string(x.shape()) +
                     " with kernel " + std::to_string(k) + ", stride " + std::to_string(stride) + ", padding " +
                     std::to_string(padding));

  const kernels::ConvGeometry geo{d.c, d.h, d.w, k, stride, padding};
  const int oh = geo.out_height(), ow = geo.out_width();
  const int plane = oh * ow;
  const int patch = geo.patch_size();
  const bool pointwise = (k == 1 && stride == 1 && padding == 0);

  Shape out_shape = d.batched ? Shape{d.n, out_c, oh, ow} : Shape{out_c, oh, ow};
  std::vector<Scalar> out(std::size_t(d.n) * out_c * plane);
  std::vector<Scalar> columns(pointwise ? 0 : std::size_t(patch) * plane);
  for (int n = 0; n < d.n; ++n) {
    auto image = x.data().subspan(std::size_t(n) * d.sample(), d.sample());
    std::span<const Scalar> cols = image;
    if (!pointwise) {
      kernels::im2col(geo, image, columns);
      cols = columns;
    }
    std::span<Scalar> dst(out.data() + std::size_t(n) * out_c * plane, std::size_t(out_c) * plane);
    kernels::gemm_nn({out_c, plane, patch}, weight.data(), cols, dst, false);
    if (bias.defined())
      for (int co = 0; co < out_c; ++co) {
        const Scalar bv = bias.data()[co];
        Scalar* row = dst.data() + std::size_t(co) * plane;
        for (int p = 0; p < plane; ++p) row[p] += bv;
      }
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return Tensor::make(std::move(out_shape), std::move(out), std::move(inputs),
                      [d, geo, out_c, plane, patch, pointwise, has_bias](Node& o) {
    Node& px = *o.parents[0];
    Node& pw = *o.parents[1];
    Node* pb = has_bias ? o.parents[2].get() : nullptr;
    std::vector<Scalar> columns(pointwise ? 0 : std::size_t(patch) * plane);
    std::vector<Scalar> dcols(px.requires_grad && !pointwise ? std::size_t(patch) * plane : 0);
    for (int n = 0; n < d.n; ++n) {
      std::span<const Scalar> dout(o.grad.data() + std::size_t(n) * out_c * plane, std::size_t(out_c) * plane);
      std::span<const Scalar> image(px.data.data() + std::size_t(n) * d.sample(), d.sample());
      if (pw.requires_grad) {
        std::span<const Scalar> cols = image;
        if (!pointwise) {
          kernels::im2col(geo, image, columns);
          cols = columns;
        }
        kernels::gemm_nt({out_c, patch, plane}, dout, cols, std::span<Scalar>(pw.grad_buffer(), pw.data.size()), true);
      }
      if (pb && pb->requires_grad) {
        Scalar* gb = pb->grad_buffer();
        for (int co = 0; co < out_c; ++co) {
          Scalar acc = 0;
          const Scalar* row = dout.data() + std::size_t(co) * plane;
          for (int p = 0; p < plane; ++p) acc += row[p];
          gb[co] += acc;
        }
      }
      if (px.requires_grad) {
        std::span<Scalar> gx(px.grad_buffer() + std::size_t(n) * d.sample(), d.sample());
        if (pointwise) {
          kernels::gemm_tn({patch, plane, out_c}, pw.data, dout, gx, true);
        } else {
          kernels::gemm_tn({patch, plane, out_c}, pw.data, dout, dcols, false);
          kernels::col2im(geo, dcols, gx);
        }
      }
    }
  });
}

Tensor upsample_nearest2x(const Tensor& x) {
  const ImageDims d = image_dims(x, "upsample_nearest2x");
  const int oh = 2 * d.h, ow = 2 * d.w;
  Shape shape = d.batched ? Shape{d.n, d.c, oh, ow} : Shape{d.c, oh, ow};
  std::vector<Scalar> out(std::size_t(d.n) * d.c * oh * ow);
  const std::size_t planes = std::size_t(d.n) * d.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const Scalar* src = x.data().data() + pl * d.plane();
    Scalar* dst = out.data() + pl * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) dst[std::size_t(y) * ow + xx] = src[std::size_t(y / 2) * d.w + xx / 2];
  }
  return Tensor::make(std::move(shape), std::move(out), {x}, [d, planes, oh, ow](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const Scalar* src = o.grad.data() + pl * oh * ow;
      Scalar* dst = g + pl * d.plane();
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) dst[std::size_t(y / 2) * d.w + xx / 2] += src[std::size_t(y) * ow + xx];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const ImageDims da = image_dims(a, "concat_channels");
  const ImageDims db = image_dims(b, "concat_channels");
  if (da.batched != db.batched || da.n != db.n || da.h != db.h || da.w != db.w)
    throw ShapeError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const int c = da.c + db.c;
  std::vector<Scalar> out(std::size_t(da.n) * c * da.plane());
  for (int n = 0; n < da.n; ++n) {
    std::copy_n(a.data().data() + n * da.sample(), da.sample(), out.data() + n * (da.sample() + db.sample()));
    std::copy_n(b.data().data() + n * db.sample(), db.sample(),
                out.data() + n * (da.sample() + db.sample()) + da.sample());
  }
  return Tensor::make(da.shape_with_channels(c), std::move(out), {a, b}, [da, db](Node& o) {
    const std::size_t stride = da.sample() + db.sample();
    for (int k = 0; k < 2; ++k) {
      Node& p = *o.parents[k];
      if (!p.requires_grad) continue;
      Scalar* g = p.grad_buffer();
      const std::size_t len = k == 0 ? da.sample() : db.sample();
      const std::size_t off = k == 0 ? 0 : da.sample();
      for (int n = 0; n < da.n; ++n)
        for (std::size_t i = 0; i < len; ++i) g[n * len + i] += o.grad[n * stride + off + i];
    }
  });
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
  const ImageDims d = image_dims(x, "slice_channels");
  if (begin < 0 || end > d.c || begin >= end)
    throw RangeError("slice_channels: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                     to_string(x.shape()));
  const int c = end - begin;
  const std::size_t len = std::size_t(c) * d.plane();
  std::vector<Scalar> out(std::size_t(d.n) * len);
  for (int n = 0; n < d.n; ++n)
    std::copy_n(x.data().data() + n * d.sample() + std::size_t(begin) * d.plane(), len, out.data() + n * len);
  return Tensor::make(d.shape_with_channels(c), std::move(out), {x}, [d, begin, len](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (int n = 0; n < d.n; ++n) {
      Scalar* dst = g + n * d.sample() + std::size_t(begin) * d.plane();
      for (std::size_t i = 0; i < len; ++i) dst[i] += o.grad[n * len + i];
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  const ImageDims d = image_dims(x, "add_channel_bias");
  const bool per_sample = b.ndim() == 2;
  if (!((b.ndim() == 1 && b.dim(0) == d.c) || (per_sample && b.dim(0) == d.n && b.dim(1) == d.c)))
    throw ShapeError("add_channel_bias: bias " + to_string(b.shape()) + " does not fit " + to_string(x.shape()));
  std::vector<Scalar> out(x.data().begin(), x.data().end());
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c) {
      const Scalar bv = b.data()[per_sample ? std::size_t(n) * d.c + c : std::size_t(c)];
      Scalar* row = out.data() + n * d.sample() + c * d.plane();
      for (std::size_t p = 0; p < d.plane(); ++p) row[p] += bv;
    }
  return Tensor::make(x.shape(), std::move(out), {x, b}, [d, per_sample](Node& o) {
    Node& px = *o.parents[0];
    Node& pb = *o.parents[1];
    if (px.requires_grad) {
      Scalar* g = px.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      Scalar* g = pb.grad_buffer();
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
          Scalar acc = 0;
          const Scalar* row = o.grad.data() + n * d.sample() + c * d.plane();
          for (std::size_t p = 0; p < d.plane(); ++p) acc += row[p];
          g[per_sample ? std::size_t(n) * d.c + c : std::size_t(c)] += acc;
        }
    }
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  require_rank(x, 2, "add_row_bias");
  const int rows = x.dim(0), cols = x.dim(1);
  if (b.ndim() != 1 || b.dim(0) != cols)
    throw ShapeError("add_row_bias: bias " + to_string(b.shape()) + " does not fit " + to_string(x.shape()));
  std::vector<Scalar> out(x.data().begin(), x.data().end());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[std::size_t(r) * cols + c] += b.data()[c];
  return Tensor::make(x.shape(), std::move(out), {x, b}, [rows, cols](Node& o) {
    Node& px = *o.parents[0];
    Node& pb = *o.parents[1];
    if (px.requires_grad) {
      Scalar* g = px.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      Scalar* g = pb.grad_buffer();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) g[c] += o.grad[std::size_t(r) * cols + c];
    }
  });
}

Tensor chw_to_tokens(const Tensor& x) {
  const ImageDims d = image_dims(x, "chw_to_tokens");
  if (d.n != 1) throw ShapeError("chw_to_tokens: expects a single sample, got " + to_string(x.shape()));
  const int tokens = d.h * d.w;
  std::vector<Scalar> out(x.size());
  for (int c = 0; c < d.c; ++c)
    for (int p = 0; p < tokens; ++p) out[std::size_t(p) * d.c + c] = x.data()[std::size_t(c) * tokens + p];
  return Tensor::make({tokens, d.c}, std::move(out), {x}, [d, tokens](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (int c = 0; c < d.c; ++c)
      for (int p = 0; p < tokens; ++p) g[std::size_t(c) * tokens + p] += o.grad[std::size_t(p) * d.c + c];
  });
}

Tensor tokens_to_chw(const Tensor& t, int height, int width) {
  require_rank(t, 2, "tokens_to_chw");
  const int tokens = t.dim(0), c = t.dim(1);
  if (tokens != height * width)
    throw ShapeError("tokens_to_chw: " + to_string(t.shape()) + " cannot fill " + std::to_string(height) + "x" +
                     std::to_string(width));
  std::vector<Scalar> out(t.size());
  for (int p = 0; p < tokens; ++p)
    for (int ch = 0; ch < c; ++ch) out[std::size_t(ch) * tokens + p] = t.data()[std::size_t(p) * c + ch];
  return Tensor::make({1, c, height, width}, std::move(out), {t}, [tokens, c](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (int p = 0; p < tokens; ++p)
      for (int ch = 0; ch < c; ++ch) g[std::size_t(p) * c + ch] += o.grad[std::size_t(ch) * tokens + p];
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  require_rank(x, 2, "gather_rows");
  const int n = x.dim(0), cols = x.dim(1);
  std::vector<Scalar> out(rows.size() * std::size_t(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= n) throw RangeError("gather_rows: row index out of range");
    std::copy_n(x.data().data() + std::size_t(rows[i]) * cols, cols, out.data() + i * cols);
  }
  return Tensor::make({static_cast<int>(rows.size()), cols}, std::move(out), {x}, [rows, cols](Node& o) {
    Scalar* g = o.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Scalar* dst = g + std::size_t(rows[i]) * cols;
      const Scalar* src = o.grad.data() + i * cols;
      for (int c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const int cols = parts.front().ndim() == 2 ? parts.front().dim(1) : -1;
  int rows = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.dim(1) != cols)
      throw ShapeError("concat_rows: inconsistent part shape " + to_string(p.shape()));
    rows += p.dim(0);
  }
  std::vector<Scalar> out;
  out.reserve(std::size_t(rows) * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make({rows, cols}, std::move(out), parts, [](Node& o) {
    std::size_t offset = 0;
    for (auto& parent : o.parents) {
      if (parent->requires_grad) {
        Scalar* g = parent->grad_buffer();
        for (std::size_t i = 0; i < parent->data.size(); ++i) g[i] += o.grad[offset + i];
      }
      offset += parent->data.size();
    }
  });
}

}  // namespace lowlight
