// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_AD_ADAM_HPP_
#define CHANEST_AD_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "chanest/ad/tensor.hpp"

namespace chanest::ad {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moment buffers plus the shared step counter.
class AdamState {
 public:
  AdamState(std::span<const Tensor> params, AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  std::uint64_t step() const { return step_; }
  std::span<const double> first_moment(std::size_t i) const { return m_.at(i); }
  std::span<const double> second_moment(std::size_t i) const { return v_.at(i); }

 private:
  friend void adam_step(std::span<Tensor> params, AdamState& state);

  AdamOptions options_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// The parameter list must match the one the state was built from.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace chanest::ad

#endif  // CHANEST_AD_ADAM_HPP_
