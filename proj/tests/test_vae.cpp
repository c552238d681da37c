#include <chrono>
#include <cmath>

#include "doctest.h"
#include "lowlight/errors.hpp"
#include "lowlight/optim.hpp"
#include "lowlight/vae.hpp"
#include "test_util.hpp"

using namespace lowlight;
using testing::bitwise_equal;
using testing::random_tensor;
using testing::random_uniform;

namespace {
VaeConfig tiny_config() {
  VaeConfig c;
  c.base_channels = 4;
  c.channel_multipliers = {1, 2};
  c.latent_channels = 2;
  return c;
}
}  // namespace

TEST_CASE("vae encode shapes") {
  VaeConfig c;
  c.base_channels = 4;
  c.channel_multipliers = {1, 2, 2, 2};
  Vae vae(c, 1);
  Rng rng(2);
  SUBCASE("64x64 input with four blocks gives a 4x4 latent and four skips") {
    VaeOutput out = vae.encode(random_uniform({3, 64, 64}, rng));
    CHECK(out.mu.shape() == Shape{4, 4, 4});
    CHECK(out.logvar.shape() == out.mu.shape());
    REQUIRE(out.skip_features.size() == 4);
    for (int b = 0; b < 4; ++b) {
      CHECK(out.skip_features[b].dim(-1) == 64 >> b);
      CHECK(out.skip_features[b].dim(-3) == c.encoder_channels(b));
    }
    CHECK(vae.decode(out.mu, out.skip_features).shape() == Shape{3, 64, 64});
  }
  SUBCASE("batch dimension is preserved") {
    VaeOutput out = vae.encode(random_uniform({2, 3, 32, 16}, rng));
    CHECK(out.mu.shape() == Shape{2, 4, 2, 1});
    for (const auto& e : out.skip_features) CHECK(e.dim(0) == 2);
    CHECK(vae.decode(out.mu, out.skip_features).shape() == Shape{2, 3, 32, 16});
    CHECK(vae.decode(out.mu).shape() == Shape{2, 3, 32, 16});
  }
  SUBCASE("indivisible extents are rejected") {
    CHECK_THROWS_AS(vae.encode(random_uniform({3, 24, 32}, rng)), ShapeError);
  }
  SUBCASE("skip shape mismatch is rejected") {
    VaeOutput a = vae.encode(random_uniform({3, 32, 32}, rng));
    VaeOutput b = vae.encode(random_uniform({3, 16, 16}, rng));
    CHECK_THROWS_AS(vae.decode(a.mu, b.skip_features), ShapeError);
  }
}

TEST_CASE("vae forward is deterministic") {
  Vae a(tiny_config(), 7), b(tiny_config(), 7);
  Rng rng(3);
  Tensor x = random_uniform({3, 16, 16}, rng);
  VaeOutput oa = a.encode(x), ob = b.encode(x);
  CHECK(bitwise_equal(oa.mu, ob.mu));
  CHECK(bitwise_equal(oa.logvar, ob.logvar));
  CHECK(bitwise_equal(a.decode(oa.mu, oa.skip_features), b.decode(ob.mu, ob.skip_features)));
}

TEST_CASE("zero residual convolutions reduce to plain decoding") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Vae vae(tiny_config(), seed);
    for (auto& conv : vae.residual_convs()) {
      for (auto& v : conv.weight.mutable_data()) v = 0;
      for (auto& v : conv.bias.mutable_data()) v = 0;
    }
    Rng rng(seed + 100);
    VaeOutput enc = vae.encode(random_uniform({3, 16, 16}, rng));
    Tensor z = random_tensor(enc.mu.shape(), rng);
    CHECK(bitwise_equal(vae.decode(z, enc.skip_features), vae.decode(z)));
  }
}

TEST_CASE("decoder output stays in the unit range") {
  Vae vae(tiny_config(), 4);
  Rng rng(5);
  Tensor out = vae.decode(random_tensor({2, 4, 4}, rng, false, 20.0));
  for (Scalar v : out.data()) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("kl divergence") {
  CHECK(kl_divergence(Tensor::zeros({3, 2}), Tensor::zeros({3, 2})).item() == 0);
  CHECK(kl_divergence(Tensor::full({3, 2}, 1), Tensor::zeros({3, 2})).item() == doctest::Approx(0.5));
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Tensor mu = random_tensor({8}, rng, false, 2.0), lv = random_tensor({8}, rng, false, 2.0);
    CHECK(kl_divergence(mu, lv).item() >= 0);
  }
  // Zero exactly at the origin of a grid of (mu, logvar) values.
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j) {
      const double kl = kl_divergence(Tensor::scalar(Scalar(0.25 * i)), Tensor::scalar(Scalar(0.25 * j))).item();
      if (i == 0 && j == 0)
        CHECK(kl == 0);
      else
        CHECK(kl > 0);
    }
  CHECK_THROWS_AS(kl_divergence(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("reparameterize") {
  Rng rng(11);
  Tensor mu = random_tensor({16}, rng);
  SUBCASE("vanishing variance returns the mean") {
    Rng r(1);
    Tensor z = reparameterize(mu, Tensor::full({16}, -60), r);
    CHECK(testing::max_abs_diff(z, mu) < 1e-6);
  }
  SUBCASE("fixed seed reproduces the draw") {
    Rng r1(42), r2(42);
    Tensor lv = Tensor::zeros({16});
    CHECK(bitwise_equal(reparameterize(mu, lv, r1), reparameterize(mu, lv, r2)));
  }
  SUBCASE("moments match within three standard errors") {
    const int draws = 100000;
    const double m = 0.7, lv = -0.4, var = std::exp(lv);
    Tensor mus = Tensor::full({draws}, Scalar(m));
    Rng r(123);
    Tensor z = reparameterize(mus, Tensor::full({draws}, Scalar(lv)), r);
    double s = 0, s2 = 0;
    for (Scalar v : z.data()) s += v;
    const double mean = s / draws;
    for (Scalar v : z.data()) s2 += (v - mean) * (v - mean);
    const double sample_var = s2 / (draws - 1);
    CHECK(std::abs(mean - m) < 3 * std::sqrt(var / draws));
    // Var of the sample variance of a Gaussian is 2 sigma^4 / (n - 1).
    CHECK(std::abs(sample_var - var) < 3 * std::sqrt(2 * var * var / (draws - 1)));
  }
}

TEST_CASE("stage-1 objective") {
  Rng rng(6);
  Tensor x = random_uniform({3, 8, 8}, rng);
  SUBCASE("perfect reconstruction with a standard posterior is zero") {
    Stage1Loss l = stage1_objective(x, x, Tensor::zeros({2, 1, 1}), Tensor::zeros({2, 1, 1}), 1e-4);
    CHECK(l.total.item() == 0);
  }
  SUBCASE("beta zero gives pure L2") {
    Tensor y = random_uniform({3, 8, 8}, rng);
    Tensor mu = random_tensor({2, 1, 1}, rng);
    Stage1Loss l = stage1_objective(x, y, mu, mu, 0.0);
    CHECK(l.total.item() == mse(x, y).item());
  }
}

TEST_CASE("stage-1 loss overfits a single pair") {
  Vae vae(tiny_config(), 21);
  Rng data_rng(22);
  Tensor noisy = random_uniform({3, 16, 16}, data_rng, 0.0, 0.1);
  Tensor clean = random_uniform({3, 16, 16}, data_rng);
  Adam opt({{nn::tensors_of(vae.parameters()), 2e-3}}, 0.5, 0.9);
  Rng rng(23);
  double first = 0, last = 0;
  for (int step = 0; step < 500; ++step) {
    opt.zero_grad();
    Stage1Loss loss = stage1_loss(vae, noisy, clean, rng);
    loss.total.backward();
    opt.step();
    if (step == 0) first = loss.total.item();
    last = loss.total.item();
  }
  MESSAGE("stage-1 overfit: " << first << " -> " << last);
  CHECK(last <= 0.5 * first);
}
