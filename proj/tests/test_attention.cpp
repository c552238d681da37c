#include <cmath>
#include <limits>

#include "doctest.h"
#include "lowlight/attention.hpp"
#include "lowlight/errors.hpp"
#include "test_util.hpp"

using namespace lowlight;
using testing::bitwise_equal;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

// Row-major double matrices for the oracle.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) m[i][j] = t.data()[std::size_t(i) * t.dim(1) + j];
  return m;
}

Mat project(const Mat& x, const Mat& w) {  // x w^T
  Mat out(x.size(), std::vector<double>(w.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.size(); ++o)
      for (std::size_t k = 0; k < w[o].size(); ++k) out[i][o] += x[i][k] * w[o][k];
  return out;
}

// softmax(Q K^T / sqrt(dk) + mask) V, mask[i][j] false meaning excluded.
Mat masked_attention(const Tensor& z, const Tensor& c, const AttentionWeights& w,
                     const std::vector<std::vector<bool>>* mask = nullptr) {
  Mat q = project(to_mat(z), to_mat(w.w_q));
  Mat k = project(to_mat(c), to_mat(w.w_k));
  Mat v = project(to_mat(c), to_mat(w.w_v));
  const double dk = double(q[0].size());
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> s(k.size(), -std::numeric_limits<double>::infinity());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (mask && !(*mask)[i][j]) continue;
      s[j] = 0;
      for (std::size_t d = 0; d < q[i].size(); ++d) s[j] += q[i][d] * k[j][d];
      s[j] /= std::sqrt(dk);
      mx = std::max(mx, s[j]);
    }
    double total = 0;
    for (auto& e : s) total += (e = std::exp(e - mx));
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t d = 0; d < v[j].size(); ++d) out[i][d] += s[j] / total * v[j][d];
  }
  return out;
}

double max_diff(const Tensor& t, const Mat& m) {
  double worst = 0;
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j)
      worst = std::max(worst, std::abs(t.data()[std::size_t(i) * t.dim(1) + j] - m[i][j]));
  return worst;
}

int region_of(int token, int width, RegionSpec spec) {
  const int y = token / width, x = token % width;
  return (y / spec.height) * (width / spec.width) + x / spec.width;
}

}  // namespace

TEST_CASE("cross attention") {
  Rng rng(1);
  SUBCASE("a single key returns its value row") {
    AttentionWeights w = AttentionWeights::create(4, 3, rng);
    Tensor z = random_tensor({1, 4}, rng), c = random_tensor({1, 4}, rng);
    Tensor v = matmul(c, transpose(w.w_v));
    CHECK(bitwise_equal(cross_attention(z, c, w), v));
  }
  SUBCASE("identical keys give the column mean of V") {
    AttentionWeights w = AttentionWeights::create(4, 3, rng);
    Tensor z = random_tensor({5, 4}, rng);
    // Zero the key projection so every key is identical.
    for (auto& x : w.w_k.mutable_data()) x = 0;
    Tensor c = random_tensor({6, 4}, rng);
    Mat v = project(to_mat(c), to_mat(w.w_v));
    Tensor out = cross_attention(z, c, w);
    for (int i = 0; i < 5; ++i)
      for (int d = 0; d < 3; ++d) {
        double m = 0;
        for (auto& row : v) m += row[d] / 6.0;
        CHECK(out.data()[i * 3 + d] == doctest::Approx(m).epsilon(1e-5));
      }
  }
  SUBCASE("random instance matches the direct formula") {
    for (int trial = 0; trial < 10; ++trial) {
      AttentionWeights w = AttentionWeights::create(8, 8, rng);
      Tensor z = random_tensor({6, 8}, rng), c = random_tensor({5, 8}, rng);
      CHECK(max_diff(cross_attention(z, c, w), masked_attention(z, c, w)) < 1e-5);
    }
  }
  SUBCASE("probability rows sum to one") {
    AttentionWeights w = AttentionWeights::create(8, 4, rng);
    Tensor a = attention_probabilities(random_tensor({7, 8}, rng), random_tensor({9, 8}, rng, false, 3.0), w);
    for (int i = 0; i < 7; ++i) {
      double s = 0;
      for (int j = 0; j < 9; ++j) s += a.data()[i * 9 + j];
      CHECK(std::abs(s - 1) < 1e-6);
    }
  }
  SUBCASE("feature mismatch is a shape error") {
    AttentionWeights w = AttentionWeights::create(8, 4, rng);
    CHECK_THROWS_AS(cross_attention(random_tensor({2, 7}, rng), random_tensor({2, 8}, rng), w), ShapeError);
    CHECK_THROWS_AS(cross_attention(random_tensor({2, 8}, rng), random_tensor({2, 6}, rng), w), ShapeError);
  }
}

TEST_CASE("region partition") {
  SUBCASE("4x4 grid with 2x2 regions") {
    RegionPartition p = partition_regions(4, 4, {2, 2});
    REQUIRE(p.count() == 4);
    for (const auto& r : p.regions) CHECK(r.size() == 4);
    CHECK(p.regions[0] == std::vector<int>{0, 1, 4, 5});
    CHECK(p.regions[3] == std::vector<int>{10, 11, 14, 15});
  }
  SUBCASE("full-extent region") {
    RegionPartition p = partition_regions(3, 5, {3, 5});
    REQUIRE(p.count() == 1);
    CHECK(p.regions[0].size() == 15);
  }
  SUBCASE("indivisible extents") {
    CHECK_THROWS_AS(partition_regions(4, 6, {4, 4}), ShapeError);
  }
  SUBCASE("scatter inverts partition bitwise") {
    Rng rng(3);
    for (RegionSpec spec : {RegionSpec{2, 2}, RegionSpec{1, 3}, RegionSpec{4, 1}, RegionSpec{4, 6}}) {
      RegionPartition p = partition_regions(4, 6, spec);
      Tensor z = random_tensor({24, 5}, rng);
      CHECK(bitwise_equal(scatter(partition(z, p), p), z));
    }
  }
}

TEST_CASE("region cross attention") {
  Rng rng(5);
  const int h = 4, w = 6, d = 8;
  AttentionWeights weights = AttentionWeights::create(d, 6, rng);

  SUBCASE("a single region equals global attention") {
    Tensor z = random_tensor({h * w, d}, rng), c = random_tensor({h * w, d}, rng);
    CHECK(max_abs_diff(region_cross_attention(z, c, h, w, {h, w}, weights), cross_attention(z, c, weights)) <= 1e-6);
  }

  SUBCASE("matches block-diagonally masked global attention") {
    for (RegionSpec spec : {RegionSpec{2, 2}, RegionSpec{2, 3}, RegionSpec{1, 6}}) {
      Tensor z = random_tensor({h * w, d}, rng), c = random_tensor({h * w, d}, rng);
      std::vector<std::vector<bool>> mask(h * w, std::vector<bool>(h * w));
      for (int i = 0; i < h * w; ++i)
        for (int j = 0; j < h * w; ++j) mask[i][j] = region_of(i, w, spec) == region_of(j, w, spec);
      CHECK(max_diff(region_cross_attention(z, c, h, w, spec, weights), masked_attention(z, c, weights, &mask)) < 1e-5);
    }
  }

  SUBCASE("perturbing one region's condition only changes that region") {
    const RegionSpec spec{2, 2};
    Tensor z = random_tensor({h * w, d}, rng), c = random_tensor({h * w, d}, rng);
    Tensor base = region_cross_attention(z, c, h, w, spec, weights);
    for (int target = 0; target < 6; ++target) {
      std::vector<Scalar> perturbed(c.data().begin(), c.data().end());
      for (int t = 0; t < h * w; ++t)
        if (region_of(t, w, spec) == target)
          for (int k = 0; k < d; ++k) perturbed[t * d + k] += Scalar(rng.normal());
      Tensor out = region_cross_attention(z, Tensor::from_data(c.shape(), perturbed), h, w, spec, weights);
      for (int t = 0; t < h * w; ++t) {
        bool same = true;
        for (int k = 0; k < out.dim(1); ++k) same = same && out.data()[t * out.dim(1) + k] == base.data()[t * out.dim(1) + k];
        CHECK(same == (region_of(t, w, spec) != target));
      }
    }
  }

  SUBCASE("cross-region gradients are exactly zero") {
    const RegionSpec spec{2, 3};
    Tensor z = random_tensor({h * w, d}, rng);
    for (int source = 0; source < 4; ++source) {
      Tensor c = random_tensor({h * w, d}, rng, true);
      Tensor out = region_cross_attention(z, c, h, w, spec, weights);
      // Sum of the outputs of region `source` only.
      std::vector<int> rows;
      for (int t = 0; t < h * w; ++t)
        if (region_of(t, w, spec) == source) rows.push_back(t);
      sum(gather_rows(out, rows)).backward();
      bool nonzero_inside = false;
      for (int t = 0; t < h * w; ++t)
        for (int k = 0; k < d; ++k) {
          const Scalar g = c.grad()[t * d + k];
          if (region_of(t, w, spec) == source)
            nonzero_inside = nonzero_inside || g != 0;
          else
            CHECK(g == 0);
        }
      CHECK(nonzero_inside);
    }
  }

  SUBCASE("permuting condition tokens within a region leaves outputs unchanged") {
    const RegionSpec spec{2, 2};
    Tensor z = random_tensor({h * w, d}, rng), c = random_tensor({h * w, d}, rng);
    Tensor base = region_cross_attention(z, c, h, w, spec, weights);
    RegionPartition p = partition_regions(h, w, spec);
    std::vector<Scalar> permuted(c.data().begin(), c.data().end());
    for (const auto& region : p.regions) {
      // Rotate tokens inside the region by one position.
      for (std::size_t i = 0; i < region.size(); ++i) {
        const int from = region[(i + 1) % region.size()], to = region[i];
        for (int k = 0; k < d; ++k) permuted[to * d + k] = c.data()[from * d + k];
      }
    }
    Tensor out = region_cross_attention(z, Tensor::from_data(c.shape(), permuted), h, w, spec, weights);
    CHECK(max_abs_diff(out, base) < 1e-6);
  }

  SUBCASE("extent mismatch is a shape error") {
    CHECK_THROWS_AS(region_cross_attention(random_tensor({24, d}, rng), random_tensor({12, d}, rng), h, w, {2, 2}, weights),
                    ShapeError);
    CHECK_THROWS_AS(region_cross_attention(random_tensor({24, d}, rng), random_tensor({24, d}, rng), h, w, {4, 4}, weights),
                    ShapeError);
  }
}

TEST_CASE("attention block") {
  Rng rng(8);
  AttentionBlock block(8, 2, rng);
  Tensor h = random_tensor({1, 8, 4, 4}, rng, true);
  Tensor cond = random_tensor({1, 8, 4, 4}, rng, true);
  Tensor out = block(h, cond, {2, 2});
  CHECK(out.shape() == h.shape());
  sum(square(out)).backward();
  bool cond_grad = false;
  for (Scalar g : cond.grad()) cond_grad = cond_grad || g != 0;
  CHECK(cond_grad);
  // Self-attention path and region clamping on small grids.
  CHECK(block(h, Tensor{}, {2, 2}).shape() == h.shape());
  CHECK(block(random_tensor({1, 8, 2, 2}, rng), random_tensor({1, 8, 2, 2}, rng), {4, 4}).shape() == Shape{1, 8, 2, 2});
  CHECK_THROWS_AS(AttentionBlock(8, 3, rng), ConfigError);
}
