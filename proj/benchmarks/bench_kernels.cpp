// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

// Serial reference kernels against the blocked parallel ones on the conv
// shapes of the default 64x32 U-Net, plus one full training iteration.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "chanest/ad/kernels.hpp"
#include "chanest/runtime.hpp"
#include "chanest/s2s/denoiser.hpp"

namespace kernels = chanest::kernels;

namespace {

struct Layer {
  std::size_t in, out, h, w;
};

// Top-level decoder, contracting stage 2, final 2-channel output.
constexpr Layer kLayers[] = {{98, 96, 64, 32}, {48, 48, 32, 16}, {96, 2, 64, 32}};

struct Buffers {
  kernels::ConvDims d;
  std::vector<double> input, weight, bias, output, grad_out, grad_in, grad_w, grad_b;

  explicit Buffers(const Layer& l) {
    d = {1, l.in, l.h, l.w, l.out, 3, 1};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (auto& x : v) x = u(rng);
    };
    fill(input, d.input_size());
    fill(weight, d.weight_size());
    fill(bias, d.out_channels);
    fill(grad_out, d.output_size());
    output.resize(d.output_size());
    grad_in.resize(d.input_size());
    grad_w.resize(d.weight_size());
    grad_b.resize(d.out_channels);
  }

  double flops() const { return 2.0 * static_cast<double>(d.output_size() * d.patch_size()); }
};

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  Buffers b(kLayers[state.range(0)]);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::conv2d_forward(b.d, b.input, b.weight, b.bias, b.output);
    } else {
      kernels::reference::conv2d_forward(b.d, b.input, b.weight, b.bias, b.output);
    }
    benchmark::DoNotOptimize(b.output.data());
  }
  state.counters["GFLOP"] = benchmark::Counter(b.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool kParallel>
void BM_ConvBackward(benchmark::State& state) {
  Buffers b(kLayers[state.range(0)]);
  for (auto _ : state) {
    if constexpr (kParallel) {
      kernels::conv2d_backward(b.d, b.input, b.weight, b.grad_out, b.grad_in, b.grad_w, b.grad_b);
    } else {
      kernels::reference::conv2d_backward(b.d, b.input, b.weight, b.grad_out, b.grad_in, b.grad_w, b.grad_b);
    }
    benchmark::DoNotOptimize(b.grad_in.data());
  }
  state.counters["GFLOP"] =
      benchmark::Counter(2.0 * b.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_TrainIteration(benchmark::State& state) {
  const auto side = static_cast<long>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  chanest::sim::ComplexMatrix h(side, side / 2);
  for (long j = 0; j < h.cols(); ++j)
    for (long i = 0; i < h.rows(); ++i) h(i, j) = {n(rng), n(rng)};
  chanest::s2s::DenoiserConfig dcfg;
  dcfg.iterations = 1;
  const chanest::s2s::UNetConfig ucfg;
  for (auto _ : state) benchmark::DoNotOptimize(chanest::s2s::train(h, ucfg, dcfg));
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainIteration)->Name("train_iteration")->Arg(64)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  chanest::configure_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
