// Benchmark comparing the serial reference kernels against the
// OpenMP-parallel versions used by the library.
//
//   ./fdavae_bench [--benchmark_filter=conv]

#include <benchmark/benchmark.h>

#include "fdavae/kernels.hpp"
#include "fdavae/kernels_ref.hpp"
#include "fdavae/rng.hpp"

using fdavae::Tensor;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor t(n, c, h, w);
  fdavae::RngStream rng(seed);
  for (auto& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

struct ConvFixture {
  Tensor x, w, y, dy, dx, dw;
  std::vector<float> bias, dbias;
  ConvFixture(int n, int ci, int co, int hw) {
    x = random_tensor(n, ci, hw, hw, 1);
    w = random_tensor(co, ci, 3, 3, 2);
    y = Tensor(n, co, hw, hw);
    dy = random_tensor(n, co, hw, hw, 3);
    dx = Tensor(n, ci, hw, hw);
    dw = Tensor(co, ci, 3, 3);
    bias.assign(co, 0.1f);
    dbias.assign(co, 0.0f);
  }
};

void bm_conv2d_forward_ref(benchmark::State& state) {
  ConvFixture f(4, 24, 24, 32);
  for (auto _ : state) {
    fdavae::ref::conv2d_forward(f.x, f.w, f.bias.data(), 1, 1, f.y);
    benchmark::ClobberMemory();
  }
}

void bm_conv2d_forward_omp(benchmark::State& state) {
  ConvFixture f(4, 24, 24, 32);
  for (auto _ : state) {
    fdavae::kernels::conv2d_forward(f.x, f.w, f.bias.data(), 1, 1, f.y);
    benchmark::ClobberMemory();
  }
}

void bm_conv2d_backward_ref(benchmark::State& state) {
  ConvFixture f(4, 24, 24, 32);
  for (auto _ : state) {
    fdavae::ref::conv2d_backward_input(f.dy, f.w, 1, 1, f.dx);
    fdavae::ref::conv2d_backward_params(f.dy, f.x, 1, 1, f.dw, f.dbias.data());
    benchmark::ClobberMemory();
  }
}

void bm_conv2d_backward_omp(benchmark::State& state) {
  ConvFixture f(4, 24, 24, 32);
  for (auto _ : state) {
    fdavae::kernels::conv2d_backward_input(f.dy, f.w, 1, 1, f.dx);
    fdavae::kernels::conv2d_backward_params(f.dy, f.x, 1, 1, f.dw,
                                            f.dbias.data());
    benchmark::ClobberMemory();
  }
}

void bm_instance_norm_ref(benchmark::State& state) {
  Tensor x = random_tensor(8, 48, 32, 32, 5);
  Tensor y = Tensor::like(x);
  std::vector<float> gamma(48, 1.0f), beta(48, 0.0f), mean, inv_std;
  for (auto _ : state) {
    fdavae::ref::instance_norm_forward(x, gamma.data(), beta.data(), 1e-5f, y,
                                       mean, inv_std);
    benchmark::ClobberMemory();
  }
}

void bm_instance_norm_omp(benchmark::State& state) {
  Tensor x = random_tensor(8, 48, 32, 32, 5);
  Tensor y = Tensor::like(x);
  std::vector<float> gamma(48, 1.0f), beta(48, 0.0f), mean, inv_std;
  for (auto _ : state) {
    fdavae::kernels::instance_norm_forward(x, gamma.data(), beta.data(), 1e-5f,
                                           y, mean, inv_std);
    benchmark::ClobberMemory();
  }
}

void bm_gemm_ref(benchmark::State& state) {
  Tensor a = random_tensor(1, 1, 256, 128, 7);
  Tensor b = random_tensor(1, 1, 128, 256, 8);
  Tensor c = Tensor(1, 1, 256, 256);
  for (auto _ : state) {
    fdavae::ref::gemm(false, false, 256, 256, 128, 1.0f, a.data.data(), 128,
                      b.data.data(), 256, 0.0f, c.data.data(), 256);
    benchmark::ClobberMemory();
  }
}

void bm_gemm_omp(benchmark::State& state) {
  Tensor a = random_tensor(1, 1, 256, 128, 7);
  Tensor b = random_tensor(1, 1, 128, 256, 8);
  Tensor c = Tensor(1, 1, 256, 256);
  for (auto _ : state) {
    fdavae::kernels::gemm(false, false, 256, 256, 128, 1.0f, a.data.data(), 128,
                          b.data.data(), 256, 0.0f, c.data.data(), 256);
    benchmark::ClobberMemory();
  }
}

}  // namespace

BENCHMARK(bm_conv2d_forward_ref)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv2d_forward_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv2d_backward_ref)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_conv2d_backward_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_instance_norm_ref)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_instance_norm_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gemm_ref)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gemm_omp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
