#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "morph/kernels.hpp"

using namespace morph;
namespace k = morph::kernels;

namespace {

std::vector<Real> random_values(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<Real> v(n);
  for (auto& x : v) x = Real(u(rng));
  return v;
}

// Encoder-sized convolution: batch 8, 16 -> 32 channels at 32x32, 4x4 stride 2.
k::ConvGeometry encoder_conv() {
  k::ConvGeometry g;
  g.batch = 8;
  g.in_channels = 16;
  g.out_channels = 32;
  g.in_h = g.in_w = 32;
  g.kernel_h = g.kernel_w = 4;
  g.stride = 2;
  g.padding = 1;
  return g;
}

struct ConvData {
  k::ConvGeometry g = encoder_conv();
  std::vector<Real> in = random_values(std::size_t(g.batch * g.in_channels * g.in_h * g.in_w), 1);
  std::vector<Real> weight = random_values(std::size_t(g.out_channels * g.in_channels * 16), 2);
  std::vector<Real> bias = random_values(std::size_t(g.out_channels), 3);
  std::vector<Real> out = std::vector<Real>(std::size_t(g.batch * g.out_channels * g.out_h() * g.out_w()));
  std::vector<Real> grad_out = random_values(out.size(), 4);
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    if constexpr (Parallel) k::conv2d_forward(d.g, d.in, d.weight, d.bias, d.out);
    else k::reference::conv2d_forward(d.g, d.in, d.weight, d.bias, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardInput(benchmark::State& state) {
  ConvData d;
  std::vector<Real> grad_in(d.in.size());
  for (auto _ : state) {
    if constexpr (Parallel) k::conv2d_backward_input(d.g, d.grad_out, d.weight, grad_in);
    else k::reference::conv2d_backward_input(d.g, d.grad_out, d.weight, grad_in);
    benchmark::DoNotOptimize(grad_in.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardWeight(benchmark::State& state) {
  ConvData d;
  std::vector<Real> grad_w(d.weight.size());
  for (auto _ : state) {
    if constexpr (Parallel) k::conv2d_backward_weight(d.g, d.in, d.grad_out, grad_w);
    else k::reference::conv2d_backward_weight(d.g, d.in, d.grad_out, grad_w);
    benchmark::DoNotOptimize(grad_w.data());
  }
}

template <bool Parallel>
void BM_GridSample(benchmark::State& state) {
  const std::int64_t n = 8, c = 3, h = 64, w = 64;
  const auto image = random_values(std::size_t(n * c * h * w), 5);
  const auto field = random_values(std::size_t(n * 2 * h * w), 6);
  std::vector<Real> out(image.size());
  for (auto _ : state) {
    if constexpr (Parallel) k::grid_sample_forward(n, c, h, w, image, field, out);
    else k::reference::grid_sample_forward(n, c, h, w, image, field, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial");
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel");
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/serial");
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/parallel");
BENCHMARK(BM_ConvBackwardWeight<false>)->Name("conv_backward_weight/serial");
BENCHMARK(BM_ConvBackwardWeight<true>)->Name("conv_backward_weight/parallel");
BENCHMARK(BM_GridSample<false>)->Name("grid_sample/serial");
BENCHMARK(BM_GridSample<true>)->Name("grid_sample/parallel");

BENCHMARK_MAIN();
