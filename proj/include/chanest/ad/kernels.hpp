// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_AD_KERNELS_HPP_
#define CHANEST_AD_KERNELS_HPP_

// Raw NCHW compute kernels behind the autodiff ops.
//
// Two implementations share one signature set:
//   chanest::kernels             im2col + blocked GEMM, OpenMP over fixed blocks
//   chanest::kernels::reference  plain serial loops, kept for testing/benchmarks
//
// Block boundaries in the parallel kernels do not depend on the thread count,
// so results are bit-identical for any OMP_NUM_THREADS. Backward kernels
// accumulate (+=) into their gradient outputs.

#include <cstddef>
#include <span>

namespace chanest::kernels {

struct ConvDims {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return height + 2 * padding - kernel + 1; }
  std::size_t out_width() const { return width + 2 * padding - kernel + 1; }
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
  std::size_t input_size() const { return batch * in_channels * height * width; }
  std::size_t weight_size() const { return out_channels * patch_size(); }
  std::size_t output_size() const { return batch * out_channels * out_height() * out_width(); }
};

struct PoolDims {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t height = 2;
  std::size_t width = 2;
};

/// out = conv(input, weight) + bias. `bias` may be empty.
void conv2d_forward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);

/// Any of the gradient outputs may be empty to skip it.
void conv2d_backward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);

/// Per-window sum of a single-channel mask [N,1,H,W] -> [N,1,H',W'].
void mask_window_sum(const ConvDims& d, std::span<const double> mask, std::span<double> window_sum);

/// 2x2 stride-2 max pool. `argmax` receives the flat input index chosen per
/// output element (first maximum in row-major window order).
void maxpool2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output,
                      std::span<std::size_t> argmax);
void maxpool2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<const std::size_t> argmax,
                       std::span<double> grad_input);

/// Nearest-neighbour x2 upsampling; `d` describes the input.
void upsample2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output);
void upsample2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<double> grad_input);

namespace reference {

void conv2d_forward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);
void mask_window_sum(const ConvDims& d, std::span<const double> mask, std::span<double> window_sum);
void maxpool2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output,
                      std::span<std::size_t> argmax);
void maxpool2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<const std::size_t> argmax,
                       std::span<double> grad_input);
void upsample2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output);
void upsample2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<double> grad_input);

}  // namespace reference

/// Worker threads available to the parallel kernels.
int max_threads();
/// Caps worker threads (no-op without OpenMP).
void set_max_threads(int n);

}  // namespace chanest::kernels

#endif  // CHANEST_AD_KERNELS_HPP_
