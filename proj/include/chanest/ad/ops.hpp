// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_AD_OPS_HPP_
#define CHANEST_AD_OPS_HPP_

#include <cstddef>

#include "chanest/ad/tensor.hpp"
#include "chanest/common.hpp"

namespace chanest::ad {

/// Cross-correlation of input [N,C,H,W] with kernel [O,C,k,k] plus bias [O].
/// Stride 1; output spatial size H + 2*padding - k + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t padding);

struct PartialConvResult {
  Tensor output;
  Tensor mask;  // [N,1,H',W'], 1 wherever the window saw any valid input
};

/// Partial convolution: the windowed sum only sees input*mask and is rescaled
/// by window_size / mask_sum; windows with no valid input output 0. The mask
/// ([N,1,H,W], entries 0 or 1) is treated as a constant.
PartialConvResult pconv2d(const Tensor& input, const Tensor& mask, const Tensor& kernel, const Tensor& bias,
                          std::size_t padding);

/// 2x2 stride-2 max pooling; H and W must be even.
Tensor maxpool2(const Tensor& input);

/// Nearest-neighbour x2 upsampling.
Tensor upsample_nearest2(const Tensor& input);

/// Concatenation along axis 1. `b` may be undefined (zero channels).
Tensor concat_channels(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& input);

/// Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate).
Tensor dropout(const Tensor& input, double rate, Rng& rng);

/// sum(weight * (pred - target)^2), differentiable w.r.t. pred only.
Tensor masked_sq_error(const Tensor& pred, const Tensor& target, const Tensor& weight);

/// sum(coeffs * input); `coeffs` is a constant. Handy for probing gradients.
Tensor weighted_sum(const Tensor& input, const Tensor& coeffs);

/// Elementwise product with a constant tensor of the same shape, or with a
/// single-channel [N,1,H,W] tensor broadcast across channels.
Tensor mul_constant(const Tensor& input, const Tensor& factor);

}  // namespace chanest::ad

#endif  // CHANEST_AD_OPS_HPP_
