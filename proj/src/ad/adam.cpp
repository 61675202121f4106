// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/ad/adam.hpp"

#include <cmath>

#include "chanest/common.hpp"

namespace chanest::ad {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions options) : options_(options) {
  if (!(options.learning_rate > 0.0)) throw ValueError("Adam learning rate must be positive");
  if (!(options.beta1 > 0.0 && options.beta1 < 1.0) || !(options.beta2 > 0.0 && options.beta2 < 1.0)) {
    throw ValueError("Adam betas must lie in (0,1)");
  }
  if (!(options.epsilon > 0.0)) throw ValueError("Adam epsilon must be positive");
  for (const auto& p : params) {
    shapes_.push_back(p.shape());
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.shapes_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but state tracks " +
                     std::to_string(state.shapes_.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != state.shapes_[i]) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has shape " + to_string(params[i].shape()) +
                       ", state expects " + to_string(state.shapes_[i]));
    }
  }
  const auto& o = state.options_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto x = params[i].mutable_data();
    const auto g = params[i].grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      x[j] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

}  // namespace chanest::ad
