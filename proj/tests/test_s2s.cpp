// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "chanest/ad/kernels.hpp"
#include "chanest/ad/ops.hpp"
#include "chanest/est/estimators.hpp"
#include "chanest/s2s/denoiser.hpp"
#include "oracles/blind_spot.hpp"
#include "oracles/nn_oracles.hpp"

namespace ad = chanest::ad;
namespace s2s = chanest::s2s;
namespace sim = chanest::sim;
using ad::Tensor;
using sim::ComplexMatrix;

namespace {

ComplexMatrix random_complex(long r, long c, chanest::Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(r, c);
  for (long j = 0; j < c; ++j)
    for (long i = 0; i < r; ++i) m(i, j) = {n(rng), n(rng)};
  return m;
}

Tensor random_tensor(ad::Shape shape, chanest::Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

s2s::UNetConfig tiny_unet() {
  s2s::UNetConfig c;
  c.depth = 2;
  c.base_width = 6;
  c.wide_width = 8;
  return c;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

bool same_params(const s2s::UNetParams& a, const s2s::UNetParams& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape() || !same_bits(a[i].data(), b[i].data())) return false;
  }
  return true;
}

std::vector<double> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

oracle::Array4 relu(oracle::Array4 a) {
  for (auto& v : a.v) v = std::max(v, 0.0);
  return a;
}

oracle::Array4 concat(const oracle::Array4& a, const oracle::Array4& b) {
  oracle::Array4 out(1, a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<long>(a.v.size()));
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("chanest_test_s2s_" + name);
}

}  // namespace

TEST_CASE("complex/channel conversion round trips and maps indices") {
  chanest::Rng rng(3);
  const ComplexMatrix h = random_complex(6, 4, rng);
  const Tensor t = s2s::complex_to_channels(h);
  REQUIRE(t.shape() == ad::Shape{1, 2, 6, 4});
  const auto d = t.data();
  CHECK(d[2 * 4 + 3] == h(2, 3).real());
  CHECK(d[24 + 5 * 4 + 1] == h(5, 1).imag());
  CHECK(s2s::channels_to_complex(t) == h);

  ComplexMatrix real_only = h.real().cast<sim::Complex>();
  const auto rt = s2s::complex_to_channels(real_only);
  for (std::size_t i = 24; i < 48; ++i) CHECK(rt.data()[i] == 0.0);
  CHECK_THROWS_AS(s2s::channels_to_complex(Tensor::zeros({1, 3, 2, 2})), chanest::ShapeError);
}

TEST_CASE("standardizer: zero mean, unit scale and exact-enough inverse") {
  chanest::Rng rng(4);
  ComplexMatrix h = random_complex(16, 8, rng);
  h.array() = h.array() * 3.0 + sim::Complex(5.0, -1.0);
  const Tensor raw = s2s::complex_to_channels(h);
  const auto st = s2s::Standardizer::fit(raw);
  const Tensor z = st.apply(raw);
  double mean = 0.0, sq = 0.0;
  for (double v : z.data()) mean += v;
  mean /= static_cast<double>(z.size());
  for (double v : z.data()) sq += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::sqrt(sq / static_cast<double>(z.size())) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(oracle::max_abs_diff(st.invert(z).data(), raw.data()) < 1e-12);

  const auto flat = s2s::Standardizer::fit(Tensor::full({1, 2, 2, 2}, 7.0));
  CHECK(flat.scale == 1.0);
}

TEST_CASE("mask split partitions the input exactly") {
  chanest::Rng rng(5);
  const Tensor h = random_tensor({1, 2, 8, 4}, rng);
  const Tensor mask = s2s::sample_mask(8, 4, 0.3, rng);
  const auto split = s2s::split_by_mask(h, mask);
  const auto in = split.input.data(), bl = split.blind.data(), d = h.data(), m = mask.data();
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 32; ++i) {
      const std::size_t k = c * 32 + i;
      CHECK(in[k] + bl[k] == d[k]);
      CHECK((m[i] == 1.0 ? bl[k] : in[k]) == 0.0);
    }
  }

  const auto all = s2s::split_by_mask(h, Tensor::full({1, 1, 8, 4}, 1.0));
  CHECK(same_bits(all.input.data(), d));
  for (double v : all.blind.data()) CHECK(v == 0.0);
  const auto none = s2s::split_by_mask(h, Tensor::zeros({1, 1, 8, 4}));
  CHECK(same_bits(none.blind.data(), d));
  for (double v : none.input.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(s2s::split_by_mask(h, Tensor::full({1, 1, 8, 4}, 0.5)), chanest::ValueError);
  CHECK_THROWS_AS(s2s::split_by_mask(h, Tensor::zeros({1, 1, 4, 8})), chanest::ShapeError);
}

TEST_CASE("bernoulli masks blind p_drop of the entries") {
  chanest::Rng rng(6);
  double total = 0.0;
  for (int d = 0; d < 100; ++d) {
    const Tensor m = s2s::sample_mask(64, 32, 0.3, rng);
    double blind = 0.0;
    for (double v : m.data()) blind += v == 0.0;
    const double frac = blind / 2048.0;
    CHECK(std::abs(frac - 0.3) < 0.05);
    total += frac;
  }
  CHECK(std::abs(total / 100.0 - 0.3) < 0.03);
}

TEST_CASE("degenerate masks are redrawn and counted") {
  chanest::Rng rng(7);
  std::size_t resamples = 0;
  for (int d = 0; d < 100; ++d) {
    const Tensor m = s2s::sample_mask(1, 2, 0.5, rng, &resamples);
    CHECK(m.data()[0] + m.data()[1] == 1.0);
  }
  CHECK(resamples > 0);
  CHECK_THROWS_AS(s2s::sample_mask(1, 1, 0.3, rng), chanest::ShapeError);
  CHECK_THROWS_AS(s2s::sample_mask(4, 4, 0.0, rng), chanest::ValueError);
  CHECK_THROWS_AS(s2s::sample_mask(4, 4, 1e-300, rng), chanest::ValueError);
}

TEST_CASE("parameter count matches a layer table") {
  // {in, out} per 3x3 conv: contracting path, then expansive levels deepest first.
  const std::vector<std::pair<std::size_t, std::size_t>> layers = {
      {2, 48},  {48, 48},  {48, 48}, {48, 48},  {48, 48},  {96, 96},  {96, 96},
      {144, 96}, {96, 96}, {144, 96}, {96, 96}, {144, 96}, {96, 96}, {98, 96}, {96, 2}};
  std::size_t expected = 0;
  for (auto [in, out] : layers) expected += in * out * 9 + out;
  chanest::Rng rng(1);
  const auto params = s2s::init_unet({}, rng);
  CHECK(params.size() == 30);
  CHECK(s2s::parameter_count(params) == expected);
  CHECK(expected == 959282);
}

TEST_CASE("init draws weights within 1/sqrt(fan_in) and zero biases") {
  chanest::Rng rng(2);
  const auto params = s2s::init_unet(tiny_unet(), rng);
  for (std::size_t i = 0; i < params.size(); i += 2) {
    const auto& w = params[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.dim(1) * 9));
    double widest = 0.0;
    for (double v : w.data()) widest = std::max(widest, std::abs(v));
    CHECK(widest <= bound);
    CHECK(widest > 0.5 * bound);
    for (double v : params[i + 1].data()) CHECK(v == 0.0);
  }
}

TEST_CASE("U-Net shapes: 64x32 bottleneck is 2x1 and the output matches the input") {
  chanest::Rng rng(8);
  const s2s::UNetConfig cfg;
  const auto params = s2s::init_unet(cfg, rng);
  const Tensor h = random_tensor({1, 2, 64, 32}, rng);
  const Tensor mask = s2s::sample_mask(64, 32, 0.3, rng);
  const auto split = s2s::split_by_mask(h, mask);
  const ad::NoGradGuard no_grad;

  Tensor x = split.input, m = mask;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    auto pc = ad::pconv2d(x, m, params[2 * i], params[2 * i + 1], 1);
    x = ad::maxpool2(ad::relu(pc.output));
    m = ad::maxpool2(pc.mask);
  }
  CHECK(x.shape() == ad::Shape{1, 48, 2, 1});

  const Tensor out = s2s::unet_forward(split.input, mask, params, cfg, &rng);
  CHECK(out.shape() == ad::Shape{1, 2, 64, 32});

  CHECK_THROWS_AS(s2s::unet_forward(random_tensor({1, 2, 48, 32}, rng), mask, params, cfg, nullptr),
                  chanest::ShapeError);
  auto short_params = params;
  short_params.pop_back();
  CHECK_THROWS_AS(s2s::unet_forward(split.input, mask, short_params, cfg, nullptr), chanest::ShapeError);
}

TEST_CASE("loss: all-kept mask gives zero and a zero network gives the blind energy") {
  chanest::Rng rng(9);
  const auto cfg = tiny_unet();
  const auto params = s2s::init_unet(cfg, rng);
  const Tensor h = random_tensor({1, 2, 8, 8}, rng);
  CHECK(s2s::s2s_loss(params, h, Tensor::full({1, 1, 8, 8}, 1.0), cfg, nullptr).item() == 0.0);

  auto zero = params;
  for (auto& p : zero) p = Tensor::zeros(p.shape(), true);
  const Tensor mask = s2s::sample_mask(8, 8, 0.3, rng);
  double expected = 0.0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 64; ++i)
      if (mask.data()[i] == 0.0) expected += h.data()[c * 64 + i] * h.data()[c * 64 + i];
  CHECK(s2s::s2s_loss(zero, h, mask, cfg, nullptr).item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("loss matches a hand-composed depth-1 network on 8x8") {
  chanest::Rng rng(10);
  s2s::UNetConfig cfg;
  cfg.depth = 1;
  auto params = s2s::init_unet(cfg, rng);
  // Non-zero biases so that they are exercised too.
  for (std::size_t i = 1; i < params.size(); i += 2) params[i] = random_tensor(params[i].shape(), rng);
  const Tensor h = random_tensor({1, 2, 8, 8}, rng);
  const Tensor mask = s2s::sample_mask(8, 8, 0.3, rng);

  const auto split = s2s::split_by_mask(h, mask);
  const auto a_in = oracle::from_tensor(split.input);
  const auto a_mask = oracle::from_tensor(mask);
  auto w = [&](std::size_t i) { return oracle::from_tensor(params[i]); };
  auto b = [&](std::size_t i) { return to_vec(params[i]); };
  const auto enc = oracle::maxpool(relu(oracle::pconv(a_in, a_mask, w(0), b(1), 1).out));
  const auto cat = concat(oracle::upsample(enc), a_in);
  const auto mid = relu(oracle::conv(cat, w(2), b(3), 1));
  const auto pred = oracle::conv(mid, w(4), b(5), 1);
  std::vector<double> weight(128);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 64; ++i) weight[c * 64 + i] = 1.0 - mask.data()[i];
  const double expected = oracle::masked_sq_error(pred.v, to_vec(h), weight);

  const double got = s2s::s2s_loss(params, h, mask, cfg, nullptr).item();
  CHECK(got == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("blind spot: the prediction never reads blinded entries") {
  chanest::Rng rng(11);
  const auto cfg = tiny_unet();
  const auto params = s2s::init_unet(cfg, rng);
  const Tensor h = random_tensor({1, 2, 8, 8}, rng);
  const Tensor mask = s2s::sample_mask(8, 8, 0.3, rng);
  const auto split = s2s::split_by_mask(h, mask);

  // Rewrite every blinded entry of the noisy input: the network input is unchanged.
  std::vector<double> changed = to_vec(h);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 64; ++i)
      if (mask.data()[i] == 0.0) changed[c * 64 + i] = 0.0;
  const auto split2 = s2s::split_by_mask(Tensor::from_data(h.shape(), changed), mask);
  const Tensor p1 = s2s::unet_forward(split.input, mask, params, cfg, nullptr);
  const Tensor p2 = s2s::unet_forward(split2.input, mask, params, cfg, nullptr);
  CHECK(same_bits(p1.data(), p2.data()));

  // The loss only reads the target on blinded entries.
  const Tensor weight = Tensor::from_data(h.shape(), [&] {
    std::vector<double> v(128);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 64; ++i) v[c * 64 + i] = 1.0 - mask.data()[i];
    return v;
  }());
  const double with_blind = ad::masked_sq_error(p1, split.blind, weight).item();
  CHECK(s2s::s2s_loss(params, h, mask, cfg, nullptr).item() == with_blind);
}

TEST_CASE("blind-spot loss on noisy labels equals clean loss plus noise energy") {
  const auto r = oracle::blind_spot_identity(10000, 0.5, 21);
  CHECK(std::abs(r.noisy_mean - r.clean_mean) < 3.0 * r.combined_se);
}

TEST_CASE("train: zero iterations returns the initial network") {
  chanest::Rng rng(12);
  const ComplexMatrix h = random_complex(8, 8, rng);
  s2s::DenoiserConfig dcfg;
  dcfg.iterations = 0;
  const auto res = s2s::train(h, tiny_unet(), dcfg);
  CHECK(res.loss_trace.empty());
  CHECK(same_params(res.params, s2s::initial_params(tiny_unet(), dcfg)));
}

TEST_CASE("train is deterministic and independent of the thread count") {
  chanest::Rng rng(13);
  const ComplexMatrix h = random_complex(8, 8, rng);
  s2s::DenoiserConfig dcfg;
  dcfg.iterations = 25;
  dcfg.seed = 4;
  const auto a = s2s::train(h, tiny_unet(), dcfg);
  const int saved = chanest::kernels::max_threads();
  chanest::kernels::set_max_threads(1);
  const auto b = s2s::train(h, tiny_unet(), dcfg);
  chanest::kernels::set_max_threads(saved);
  REQUIRE(a.loss_trace.size() == 25);
  CHECK(same_bits(a.loss_trace, b.loss_trace));
  CHECK(same_params(a.params, b.params));

  dcfg.seed = 5;
  const auto c = s2s::train(h, tiny_unet(), dcfg);
  CHECK(c.loss_trace != a.loss_trace);
}

TEST_CASE("train aborts on a non-finite loss and names the iteration") {
  ComplexMatrix h = ComplexMatrix::Ones(8, 8);
  h(3, 3) = {std::numeric_limits<double>::quiet_NaN(), 0.0};
  s2s::DenoiserConfig dcfg;
  dcfg.iterations = 5;
  try {
    s2s::train(h, tiny_unet(), dcfg);
    FAIL("expected NumericError");
  } catch (const chanest::NumericError& e) {
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  s2s::UNetConfig u;
  u.depth = 0;
  CHECK_THROWS_AS(u.validate(), chanest::ValueError);
  u = {};
  u.kernel = 4;
  CHECK_THROWS_AS(u.validate(), chanest::ValueError);
  u = {};
  u.dropout = 1.0;
  CHECK_THROWS_AS(u.validate(), chanest::ValueError);
  s2s::DenoiserConfig d;
  d.ensemble = 0;
  CHECK_THROWS_AS(d.validate(), chanest::ValueError);
  d = {};
  d.p_drop = 1.0;
  CHECK_THROWS_AS(d.validate(), chanest::ValueError);
  d = {};
  d.learning_rate = -1.0;
  CHECK_THROWS_AS(d.validate(), chanest::ValueError);
}

TEST_CASE("ensemble: one term equals a single masked pass") {
  chanest::Rng rng(14);
  const ComplexMatrix h = random_complex(8, 8, rng);
  const auto cfg = tiny_unet();
  const auto params = s2s::init_unet(cfg, rng);
  s2s::DenoiserConfig dcfg;
  dcfg.ensemble = 1;

  chanest::Rng r1(99), r2(99);
  const ComplexMatrix got = s2s::predict_ensemble(params, h, cfg, dcfg, r1);
  const Tensor raw = s2s::complex_to_channels(h);
  const auto st = s2s::Standardizer::fit(raw);
  chanest::Rng term_rng = chanest::split_rng(r2, 0);
  const Tensor term = s2s::predict_term(params, st.apply(raw), cfg, dcfg.p_drop, term_rng);
  CHECK(got == s2s::channels_to_complex(st.invert(term)));
}

TEST_CASE("ensemble is the ordered mean of pre-split terms for any thread count") {
  chanest::Rng rng(15);
  const ComplexMatrix h = random_complex(8, 8, rng);
  const auto cfg = tiny_unet();
  const auto params = s2s::init_unet(cfg, rng);
  s2s::DenoiserConfig dcfg;
  dcfg.ensemble = 5;

  chanest::Rng r1(7), r2(7), r3(7);
  const ComplexMatrix got = s2s::predict_ensemble(params, h, cfg, dcfg, r1);

  const Tensor raw = s2s::complex_to_channels(h);
  const auto st = s2s::Standardizer::fit(raw);
  const Tensor z = st.apply(raw);
  std::vector<chanest::Rng> streams;
  for (std::size_t t = 0; t < 5; ++t) streams.push_back(chanest::split_rng(r2, t));
  std::vector<double> acc(z.size(), 0.0);
  for (auto& s : streams) {
    const Tensor term = s2s::predict_term(params, z, cfg, dcfg.p_drop, s);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term.data()[i];
  }
  for (auto& v : acc) v /= 5.0;
  CHECK(got == s2s::channels_to_complex(st.invert(Tensor::from_data(z.shape(), acc))));

  const int saved = chanest::kernels::max_threads();
  chanest::kernels::set_max_threads(1);
  const ComplexMatrix serial = s2s::predict_ensemble(params, h, cfg, dcfg, r3);
  chanest::kernels::set_max_threads(saved);
  CHECK(serial == got);
}

TEST_CASE("ensemble without randomness collapses to one pass") {
  chanest::Rng rng(16);
  auto cfg = tiny_unet();
  cfg.dropout = 0.0;
  const auto params = s2s::init_unet(cfg, rng);
  const Tensor h = random_tensor({1, 2, 8, 8}, rng);
  const Tensor ones = Tensor::full({1, 1, 8, 8}, 1.0);
  const ad::NoGradGuard no_grad;
  const Tensor single = s2s::unet_forward(h, ones, params, cfg, nullptr);
  std::vector<double> acc(h.size(), 0.0);
  for (int t = 0; t < 10; ++t) {
    const Tensor term = s2s::unet_forward(h, ones, params, cfg, &rng);
    CHECK(same_bits(term.data(), single.data()));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term.data()[i];
  }
  for (auto& v : acc) v /= 10.0;
  CHECK(oracle::max_abs_diff(acc, single.data()) < 1e-14);
}

TEST_CASE("parameter files round trip and reject corruption") {
  chanest::Rng rng(17);
  const auto params = s2s::init_unet(tiny_unet(), rng);
  const auto path = temp_file("params.bin");
  s2s::save_params(path, params);
  CHECK(same_params(s2s::load_params(path), params));

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(s2s::load_params(path), chanest::IoError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS(s2s::load_params(path), chanest::IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(s2s::load_params(path), chanest::IoError);
}

TEST_CASE("loss trace CSV") {
  const auto path = temp_file("trace.csv");
  s2s::write_loss_trace(path, {2.5, 0.1});
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(ss.str() == "iter,loss\n1,2.5\n2,0.10000000000000001\n");
  std::filesystem::remove(path);
}

TEST_CASE("training lowers the loss and denoises a 16x8 channel at 10 dB") {
  sim::ChannelModelConfig ccfg;
  ccfg.n_rx = 16;
  ccfg.n_tx = 8;
  ccfg.seed = 3;
  chanest::Rng rng(3);
  const ComplexMatrix h = sim::gen_channel(ccfg, rng);
  const ComplexMatrix x = sim::gen_pilots(8, 8);
  const auto rx = sim::transmit(h, x, 10.0, rng);

  s2s::UNetConfig ucfg;
  ucfg.depth = 3;
  s2s::DenoiserConfig dcfg;
  dcfg.iterations = 500;
  dcfg.ensemble = 20;
  const auto res = s2s::denoise(rx.y, x, ucfg, dcfg, &h);
  const auto& trace = res.report.loss_trace;
  REQUIRE(trace.size() == 500);
  const double early = median({trace.begin(), trace.begin() + 100});
  const double late = median({trace.end() - 100, trace.end()});
  CHECK(late < early);
  REQUIRE(res.report.input_nmse);
  REQUIRE(res.report.output_nmse);
  CHECK(*res.report.input_nmse == doctest::Approx(chanest::est::nmse(res.h_ls, h)));
  CHECK(std::isfinite(*res.report.output_nmse));
  CHECK(res.report.train_seconds > 0.0);
}
