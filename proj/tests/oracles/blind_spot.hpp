// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_TESTS_ORACLES_BLIND_SPOT_HPP_
#define CHANEST_TESTS_ORACLES_BLIND_SPOT_HPP_

// Monte-Carlo check that the blind-spot loss against noisy labels equals the
// loss against clean labels plus the noise energy on the blind support.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "chanest/s2s/denoiser.hpp"

namespace oracle {

struct BlindSpotEstimate {
  double noisy_mean = 0.0;  // E ||f(B*Hn) - Hn||^2 over (1-B)
  double clean_mean = 0.0;  // E ||f(B*Hn) - H||^2 over (1-B) + sigma^2 |1-B|
  double combined_se = 0.0;
};

inline BlindSpotEstimate blind_spot_identity(std::size_t draws, double sigma, std::uint64_t seed) {
  namespace s2s = chanest::s2s;
  s2s::UNetConfig ucfg;
  ucfg.depth = 1;
  chanest::Rng rng(seed);
  const s2s::UNetParams params = s2s::init_unet(ucfg, rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr std::size_t kSide = 8, kChannels = 2, kPlane = kSide * kSide;
  std::vector<double> clean(kChannels * kPlane);
  for (auto& v : clean) v = normal(rng);

  std::vector<double> a(draws), b(draws);
  const chanest::ad::NoGradGuard no_grad;
  for (std::size_t d = 0; d < draws; ++d) {
    std::vector<double> noisy(clean.size());
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = clean[i] + sigma * normal(rng);
    const auto h = chanest::ad::Tensor::from_data({1, kChannels, kSide, kSide}, noisy);
    const auto mask = s2s::sample_mask(kSide, kSide, 0.3, rng);
    const auto split = s2s::split_by_mask(h, mask);
    const auto out = s2s::unet_forward(split.input, mask, params, ucfg, nullptr);
    const auto pred = out.data();
    const auto m = mask.data();
    double noisy_loss = 0.0, clean_loss = 0.0;
    std::size_t blind = 0;
    for (std::size_t c = 0; c < kChannels; ++c) {
      for (std::size_t i = 0; i < kPlane; ++i) {
        if (m[i] != 0.0) continue;
        const std::size_t k = c * kPlane + i;
        noisy_loss += (pred[k] - noisy[k]) * (pred[k] - noisy[k]);
        clean_loss += (pred[k] - clean[k]) * (pred[k] - clean[k]);
        ++blind;
      }
    }
    a[d] = noisy_loss;
    b[d] = clean_loss + sigma * sigma * static_cast<double>(blind);
  }

  auto mean_se = [](const std::vector<double>& x, double& mean) {
    const auto n = static_cast<double>(x.size());
    mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0) / n);
  };
  BlindSpotEstimate r;
  const double se_a = mean_se(a, r.noisy_mean);
  const double se_b = mean_se(b, r.clean_mean);
  r.combined_se = std::sqrt(se_a * se_a + se_b * se_b);
  return r;
}

}  // namespace oracle

#endif  // CHANEST_TESTS_ORACLES_BLIND_SPOT_HPP_
