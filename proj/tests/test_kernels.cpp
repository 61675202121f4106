// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

// The parallel kernels against the serial reference kernels.

#include <doctest.h>

#include <random>
#include <vector>

#include "chanest/ad/kernels.hpp"
#include "oracles/nn_oracles.hpp"

namespace k = chanest::kernels;

TEST_CASE("parallel conv kernels agree with the serial reference") {
  std::mt19937_64 rng(31);
  // Sizes straddle the fixed column/patch block boundaries.
  const std::vector<k::ConvDims> cases = {
      {1, 2, 5, 5, 3, 3, 1}, {2, 3, 7, 4, 5, 3, 0}, {1, 48, 16, 32, 96, 3, 1}, {1, 98, 8, 8, 2, 3, 1},
      {1, 1, 3, 3, 1, 1, 0}};
  for (const auto& d : cases) {
    auto in = oracle::random_vector(d.input_size(), rng);
    auto w = oracle::random_vector(d.weight_size(), rng);
    auto b = oracle::random_vector(d.out_channels, rng);
    std::vector<double> fast(d.output_size()), ref(d.output_size());
    k::conv2d_forward(d, in, w, b, fast);
    k::reference::conv2d_forward(d, in, w, b, ref);
    CHECK(oracle::max_abs_diff(fast, ref) < 1e-11);

    auto g = oracle::random_vector(d.output_size(), rng);
    std::vector<double> gi(in.size()), gw(w.size()), gb(b.size());
    std::vector<double> ri(in.size()), rw(w.size()), rb(b.size());
    k::conv2d_backward(d, in, w, g, gi, gw, gb);
    k::reference::conv2d_backward(d, in, w, g, ri, rw, rb);
    CHECK(oracle::max_abs_diff(gi, ri) < 1e-10);
    CHECK(oracle::max_abs_diff(gw, rw) < 1e-10);
    CHECK(oracle::max_abs_diff(gb, rb) < 1e-10);
  }
}

TEST_CASE("parallel pooling, upsampling and window sums match the reference exactly") {
  std::mt19937_64 rng(37);
  const k::PoolDims d{2, 3, 8, 6};
  const std::size_t n = d.batch * d.channels * d.height * d.width;
  auto in = oracle::random_vector(n, rng);

  std::vector<double> out(n / 4), rout(n / 4);
  std::vector<std::size_t> arg(n / 4), rarg(n / 4);
  k::maxpool2_forward(d, in, out, arg);
  k::reference::maxpool2_forward(d, in, rout, rarg);
  CHECK(out == rout);
  CHECK(arg == rarg);

  auto g = oracle::random_vector(n / 4, rng);
  std::vector<double> gi(n), rgi(n);
  k::maxpool2_backward(d, g, arg, gi);
  k::reference::maxpool2_backward(d, g, rarg, rgi);
  CHECK(gi == rgi);

  std::vector<double> up(4 * n), rup(4 * n);
  k::upsample2_forward(d, in, up);
  k::reference::upsample2_forward(d, in, rup);
  CHECK(up == rup);
  auto gu = oracle::random_vector(4 * n, rng);
  std::vector<double> gd(n), rgd(n);
  k::upsample2_backward(d, gu, gd);
  k::reference::upsample2_backward(d, gu, rgd);
  CHECK(oracle::max_abs_diff(gd, rgd) < 1e-14);

  const k::ConvDims cd{2, 1, 7, 5, 1, 3, 1};
  auto mask = oracle::random_mask(cd.input_size(), rng, 0.6);
  std::vector<double> ws(cd.batch * cd.out_height() * cd.out_width()), rws(ws.size());
  k::mask_window_sum(cd, mask, ws);
  k::reference::mask_window_sum(cd, mask, rws);
  CHECK(ws == rws);
}

TEST_CASE("parallel conv is bit-identical across thread counts") {
  std::mt19937_64 rng(41);
  const k::ConvDims d{1, 20, 16, 24, 12, 3, 1};
  auto in = oracle::random_vector(d.input_size(), rng);
  auto w = oracle::random_vector(d.weight_size(), rng);
  const int saved = k::max_threads();
  std::vector<double> a(d.output_size()), b(d.output_size());
  k::set_max_threads(1);
  k::conv2d_forward(d, in, w, {}, a);
  k::set_max_threads(4);
  k::conv2d_forward(d, in, w, {}, b);
  k::set_max_threads(saved);
  CHECK(a == b);
}
