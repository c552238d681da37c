// SPDX-License-Identifier: Apache-2.0
#include "lowlight/metrics.hpp"

#include <cmath>
#include <vector>

#include "lowlight/errors.hpp"

namespace lowlight {

namespace {
void require_same_shape(const ImagePlane& a, const ImagePlane& b, const char* name) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ShapeError(std::string(name) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) +
                     "x" + std::to_string(b.height) + "x" + std::to_string(b.channels) + ")");
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  double total = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    total += w[i] = std::exp(-d * d / (2 * sigma * sigma));
  }
  for (auto& v : w) v /= total;
  return w;
}

// Valid-region separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int width, int height, const std::vector<double>& w) {
  const int k = static_cast<int>(w.size());
  const int ow = width - k + 1, oh = height - k + 1;
  std::vector<double> rows(std::size_t(height) * ow), out(std::size_t(oh) * ow);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += w[i] * plane[std::size_t(y) * width + x + i];
      rows[std::size_t(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += w[i] * rows[std::size_t(y + i) * ow + x];
      out[std::size_t(y) * ow + x] = s;
    }
  return out;
}
}  // namespace

double psnr(const ImagePlane& a, const ImagePlane& b, double max_val) {
  require_same_shape(a, b, "psnr");
  if (a.data.empty()) throw ShapeError("psnr: empty images");
  double se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    se += d * d;
  }
  const double mse = se / a.data.size();
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

double ssim(const ImagePlane& a, const ImagePlane& b, const SsimOptions& o) {
  require_same_shape(a, b, "ssim");
  if (a.width < o.window || a.height < o.window)
    throw ConfigError("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                      " is smaller than the " + std::to_string(o.window) + "x" + std::to_string(o.window) + " window");
  const std::vector<double> w = gaussian_window(o.window, o.sigma);
  const double c1 = (o.k1 * o.data_range) * (o.k1 * o.data_range);
  const double c2 = (o.k2 * o.data_range) * (o.k2 * o.data_range);
  const std::size_t plane = std::size_t(a.width) * a.height;

  double total = 0;
  for (int ch = 0; ch < a.channels; ++ch) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      x[p] = a.data[p * a.channels + ch];
      y[p] = b.data[p * b.channels + ch];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, a.width, a.height, w), my = filter_valid(y, a.width, a.height, w);
    const auto sxx = filter_valid(xx, a.width, a.height, w), syy = filter_valid(yy, a.width, a.height, w);
    const auto sxy = filter_valid(xy, a.width, a.height, w);
    double sum = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      const double num = (2 * mx[i] * my[i] + c1) * (2 * cov + c2);
      const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
      sum += num / den;
    }
    total += sum / mx.size();
  }
  return total / a.channels;
}

}  // namespace lowlight
