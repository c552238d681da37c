// SPDX-License-Identifier: Apache-2.0
// Parallel kernels against their serial reference versions.

#include <benchmark/benchmark.h>

#include <vector>

#include "lowlight/kernels.hpp"
#include "lowlight/reference_kernels.hpp"
#include "lowlight/rng.hpp"

using namespace lowlight;

namespace {

std::vector<Scalar> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Scalar> v(n);
  for (auto& x : v) x = static_cast<Scalar>(rng.normal());
  return v;
}

void BM_GemmParallel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_vector(std::size_t(n) * n, 1), b = random_vector(std::size_t(n) * n, 2);
  std::vector<Scalar> c(std::size_t(n) * n);
  for (auto _ : state) {
    kernels::gemm_nn({n, n, n}, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

void BM_GemmReference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_vector(std::size_t(n) * n, 1), b = random_vector(std::size_t(n) * n, 2);
  std::vector<Scalar> c(std::size_t(n) * n);
  for (auto _ : state) {
    reference::gemm({n, n, n}, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}

// 3x3 convolution, 32 -> 32 channels, square image of side range(0).
kernels::ConvGeometry conv_geometry(int side) { return {32, side, side, 3, 1, 1}; }

void BM_ConvParallel(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<int>(state.range(0)));
  const int out_c = 32, pixels = g.out_height() * g.out_width();
  const auto image = random_vector(std::size_t(g.channels) * g.height * g.width, 3);
  const auto weights = random_vector(std::size_t(out_c) * g.patch_size(), 4);
  std::vector<Scalar> columns(std::size_t(g.patch_size()) * pixels), out(std::size_t(out_c) * pixels);
  for (auto _ : state) {
    kernels::im2col(g, image, columns);
    kernels::gemm_nn({out_c, pixels, g.patch_size()}, weights, columns, out, false);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ConvReference(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<int>(state.range(0)));
  const int out_c = 32, pixels = g.out_height() * g.out_width();
  const auto image = random_vector(std::size_t(g.channels) * g.height * g.width, 3);
  const auto weights = random_vector(std::size_t(out_c) * g.patch_size(), 4);
  std::vector<Scalar> out(std::size_t(out_c) * pixels);
  for (auto _ : state) {
    reference::conv2d(g, out_c, image, weights, {}, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SoftmaxParallel(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = 256;
  const auto in = random_vector(std::size_t(rows) * cols, 5);
  std::vector<Scalar> out(in.size());
  for (auto _ : state) {
    kernels::softmax_rows(rows, cols, in, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SoftmaxReference(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0)), cols = 256;
  const auto in = random_vector(std::size_t(rows) * cols, 5);
  std::vector<Scalar> out(in.size());
  for (auto _ : state) {
    reference::softmax_rows(rows, cols, in, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_GemmReference)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_ConvParallel)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_ConvReference)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_SoftmaxParallel)->Arg(256)->Arg(1024);
BENCHMARK(BM_SoftmaxReference)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
