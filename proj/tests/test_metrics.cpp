#include <cmath>
#include <vector>

#include "doctest.h"
#include "lowlight/errors.hpp"
#include "lowlight/metrics.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;

namespace {

ImagePlane random_image(int w, int h, int c, Rng& rng) {
  ImagePlane img = ImagePlane::zeros(w, h, c, ColorState::SRGB);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

ImagePlane noisy_copy(const ImagePlane& a, double sigma, Rng& rng) {
  ImagePlane b = a;
  for (auto& v : b.data) v = static_cast<float>(std::clamp(v + sigma * rng.normal(), 0.0, 1.0));
  return b;
}

double psnr_oracle(const ImagePlane& a, const ImagePlane& b) {
  long double sse = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const long double d = (long double)a.data[i] - (long double)b.data[i];
    sse += d * d;
  }
  const long double mse = sse / a.data.size();
  return double(10.0L * std::log10(1.0L / mse));
}

// Direct 2-D windowed SSIM with an explicit 11x11 Gaussian kernel.
double ssim_oracle(const ImagePlane& a, const ImagePlane& b) {
  const int win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> k(win * win);
  double ksum = 0;
  for (int y = 0; y < win; ++y)
    for (int x = 0; x < win; ++x) {
      const double dy = y - 5, dx = x - 5;
      k[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      ksum += k[y * win + x];
    }
  for (auto& v : k) v /= ksum;
  double total = 0;
  for (int c = 0; c < a.channels; ++c) {
    double sum = 0;
    int count = 0;
    for (int y0 = 0; y0 + win <= a.height; ++y0)
      for (int x0 = 0; x0 + win <= a.width; ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < win; ++y)
          for (int x = 0; x < win; ++x) {
            const double w = k[y * win + x];
            const double va = a.at(y0 + y, x0 + x, c), vb = b.at(y0 + y, x0 + x, c);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    total += sum / count;
  }
  return total / a.channels;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  Rng rng(1);
  ImagePlane a = random_image(8, 8, 3, rng);
  CHECK(psnr(a, a) == kPsnrCap);
  // A uniform offset of 0.1 gives MSE = 0.01 and therefore 20 dB.
  ImagePlane z = ImagePlane::zeros(10, 10, 1, ColorState::SRGB), o = z;
  for (auto& v : o.data) v = 0.1f;
  CHECK(psnr(z, o) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(z, o, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-6));
  CHECK_THROWS_AS(psnr(a, z), ShapeError);
}

TEST_CASE("psnr and ssim match independent oracles on 20 random pairs") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = int(rng.uniform_int(11, 30)), h = int(rng.uniform_int(11, 30));
    ImagePlane a = random_image(w, h, 3, rng);
    ImagePlane b = trial % 2 ? noisy_copy(a, 0.02 + 0.2 * rng.uniform(), rng) : random_image(w, h, 3, rng);
    CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-6);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-4);
  }
}

TEST_CASE("ssim identities") {
  Rng rng(3);
  ImagePlane a = random_image(20, 17, 3, rng);
  ImagePlane b = noisy_copy(a, 0.1, rng);
  CHECK(ssim(a, a) == 1.0);
  CHECK(ssim(a, b) == ssim(b, a));
  CHECK(ssim(a, b) < 1.0);
  CHECK(ssim(a, b) > -1.0);
}

TEST_CASE("ssim of two constant images is the luminance term") {
  for (auto [c1v, c2v] : {std::pair{0.2, 0.7}, std::pair{0.5, 0.55}, std::pair{0.0, 1.0}}) {
    ImagePlane a = ImagePlane::zeros(16, 16, 3, ColorState::SRGB), b = a;
    for (auto& v : a.data) v = float(c1v);
    for (auto& v : b.data) v = float(c2v);
    const double m1 = float(c1v), m2 = float(c2v), k = 0.01 * 0.01;
    const double expected = (2 * m1 * m2 + k) / (m1 * m1 + m2 * m2 + k);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("ssim rejects images smaller than the window") {
  ImagePlane small = ImagePlane::zeros(10, 40, 3, ColorState::SRGB);
  CHECK_THROWS_AS(ssim(small, small), ConfigError);
  ImagePlane a = ImagePlane::zeros(12, 12, 3, ColorState::SRGB), b = ImagePlane::zeros(12, 13, 3, ColorState::SRGB);
  CHECK_THROWS_AS(ssim(a, b), ShapeError);
}
