// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/s2s/denoiser.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

#include "chanest/ad/adam.hpp"
#include "chanest/ad/kernels.hpp"
#include "chanest/ad/ops.hpp"
#include "chanest/est/estimators.hpp"

namespace chanest::s2s {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxMaskDraws = 10000;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_spatial(const Tensor& t, const UNetConfig& cfg) {
  if (t.rank() != 4 || t.dim(0) != 1) throw ShapeError("expected a [1,C,H,W] tensor, got " + ad::to_string(t.shape()));
  const std::size_t f = std::size_t{1} << cfg.depth;
  if (t.dim(2) % f != 0 || t.dim(3) % f != 0) {
    throw ShapeError("spatial size " + std::to_string(t.dim(2)) + "x" + std::to_string(t.dim(3)) +
                     " is not divisible by 2^depth = " + std::to_string(f));
  }
}

// Mask broadcast over `channels`, optionally complemented.
Tensor expand_mask(const Tensor& mask, std::size_t channels, bool complement) {
  const std::size_t hw = mask.dim(2) * mask.dim(3);
  std::vector<double> out(channels * hw);
  const auto m = mask.data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] = complement ? 1.0 - m[i] : m[i];
  }
  return Tensor::from_data({1, channels, mask.dim(2), mask.dim(3)}, std::move(out));
}

Tensor uniform_weight(std::size_t out_c, std::size_t in_c, std::size_t k, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_c * k * k));
  std::vector<double> w(out_c * in_c * k * k);
  for (auto& v : w) v = (2.0 * uniform01(rng) - 1.0) * bound;
  return Tensor::from_data({out_c, in_c, k, k}, std::move(w), true);
}

// Little-endian encoding regardless of host order.
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

std::uint64_t get_le(std::istream& is, int bytes, const std::filesystem::path& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw IoError(path.string() + ": truncated parameter file");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

constexpr std::uint32_t kParamVersion = 1;

}  // namespace

void UNetConfig::validate() const {
  if (depth == 0 || depth > 16) throw ValueError("depth must be in 1..16");
  if (in_channels == 0 || base_width == 0 || wide_width == 0) throw ValueError("channel widths must be positive");
  if (kernel % 2 == 0) throw ValueError("kernel size must be odd");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValueError("dropout rate must lie in [0,1)");
}

void DenoiserConfig::validate() const {
  if (!(p_drop > 0.0 && p_drop < 1.0)) throw ValueError("p_drop must lie in (0,1)");
  if (ensemble == 0) throw ValueError("ensemble size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValueError("learning_rate must be positive");
}

Tensor complex_to_channels(const ComplexMatrix& h) {
  const auto rows = static_cast<std::size_t>(h.rows()), cols = static_cast<std::size_t>(h.cols());
  std::vector<double> v(2 * rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto z = h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      v[r * cols + c] = z.real();
      v[rows * cols + r * cols + c] = z.imag();
    }
  }
  return Tensor::from_data({1, 2, rows, cols}, std::move(v));
}

ComplexMatrix channels_to_complex(const Tensor& t) {
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 2) {
    throw ShapeError("expected a [1,2,H,W] tensor, got " + ad::to_string(t.shape()));
  }
  const std::size_t rows = t.dim(2), cols = t.dim(3);
  const auto d = t.data();
  ComplexMatrix h(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {d[r * cols + c], d[rows * cols + r * cols + c]};
    }
  }
  return h;
}

Standardizer Standardizer::fit(const Tensor& t) {
  const auto d = t.data();
  const auto n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  return {mean, sd > 0.0 ? sd : 1.0};
}

Tensor Standardizer::apply(const Tensor& t) const {
  std::vector<double> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = (x - mean) / scale;
  return Tensor::from_data(t.shape(), std::move(v));
}

Tensor Standardizer::invert(const Tensor& t) const {
  std::vector<double> v(t.data().begin(), t.data().end());
  for (auto& x : v) x = x * scale + mean;
  return Tensor::from_data(t.shape(), std::move(v));
}

MaskedSplit split_by_mask(const Tensor& h, const Tensor& mask) {
  if (h.rank() != 4 || mask.rank() != 4 || mask.dim(1) != 1 || mask.dim(0) != h.dim(0) ||
      mask.dim(2) != h.dim(2) || mask.dim(3) != h.dim(3)) {
    throw ShapeError("mask " + ad::to_string(mask.shape()) + " does not fit " + ad::to_string(h.shape()));
  }
  for (double m : mask.data()) {
    if (m != 0.0 && m != 1.0) throw ValueError("mask must contain only 0 and 1");
  }
  const std::size_t hw = h.dim(2) * h.dim(3), channels = h.dim(0) * h.dim(1);
  std::vector<double> in(h.size()), blind(h.size());
  const auto d = h.data();
  const auto m = mask.data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t k = c * hw + i;
      // Exactly one side receives the value, so input + blind == h bit-exactly.
      in[k] = m[i] == 1.0 ? d[k] : 0.0;
      blind[k] = m[i] == 1.0 ? 0.0 : d[k];
    }
  }
  return {Tensor::from_data(h.shape(), std::move(in)), Tensor::from_data(h.shape(), std::move(blind)), mask};
}

Tensor sample_mask(std::size_t height, std::size_t width, double p_drop, Rng& rng, std::size_t* resamples) {
  if (!(p_drop > 0.0 && p_drop < 1.0)) throw ValueError("p_drop must lie in (0,1)");
  const std::size_t n = height * width;
  if (n < 2) throw ShapeError("a Bernoulli mask needs at least two entries");
  std::vector<double> m(n);
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == kMaxMaskDraws) {
      throw ValueError("p_drop = " + std::to_string(p_drop) + " keeps producing all-kept or all-blind masks");
    }
    std::size_t kept = 0;
    for (auto& v : m) {
      v = uniform01(rng) < p_drop ? 0.0 : 1.0;
      kept += v == 1.0;
    }
    if (kept != 0 && kept != n) break;
    if (resamples) ++*resamples;
  }
  return Tensor::from_data({1, 1, height, width}, std::move(m));
}

MaskedSplit bernoulli_sample(const Tensor& h, double p_drop, Rng& rng, std::size_t* resamples) {
  if (h.rank() != 4) throw ShapeError("expected a [1,C,H,W] tensor");
  return split_by_mask(h, sample_mask(h.dim(2), h.dim(3), p_drop, rng, resamples));
}

UNetParams init_unet(const UNetConfig& cfg, Rng& rng) {
  cfg.validate();
  UNetParams p;
  const std::size_t k = cfg.kernel;
  std::size_t cin = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    p.push_back(uniform_weight(cfg.base_width, cin, k, rng));
    p.push_back(Tensor::zeros({cfg.base_width}, true));
    cin = cfg.base_width;
  }
  std::size_t cur = cfg.base_width;
  for (std::size_t level = cfg.depth; level-- > 0;) {
    const std::size_t skip = level > 0 ? cfg.base_width : cfg.in_channels;
    const std::size_t out2 = level > 0 ? cfg.wide_width : cfg.in_channels;
    p.push_back(uniform_weight(cfg.wide_width, cur + skip, k, rng));
    p.push_back(Tensor::zeros({cfg.wide_width}, true));
    p.push_back(uniform_weight(out2, cfg.wide_width, k, rng));
    p.push_back(Tensor::zeros({out2}, true));
    cur = cfg.wide_width;
  }
  return p;
}

std::size_t parameter_count(const UNetParams& params) {
  std::size_t n = 0;
  for (const auto& t : params) n += t.size();
  return n;
}

Tensor unet_forward(const Tensor& input, const Tensor& mask, const UNetParams& params, const UNetConfig& cfg,
                    Rng* dropout_rng) {
  cfg.validate();
  check_spatial(input, cfg);
  if (params.size() != 6 * cfg.depth) {
    throw ShapeError("expected " + std::to_string(6 * cfg.depth) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  const std::size_t pad = cfg.kernel / 2;
  auto drop = [&](const Tensor& t) { return dropout_rng ? ad::dropout(t, cfg.dropout, *dropout_rng) : t; };

  std::vector<Tensor> skips{input};
  Tensor h = input;
  Tensor m = mask;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    auto pc = ad::pconv2d(h, m, params[2 * i], params[2 * i + 1], pad);
    h = ad::maxpool2(ad::relu(pc.output));
    m = ad::maxpool2(pc.mask);
    skips.push_back(h);
  }
  std::size_t j = 2 * cfg.depth;
  for (std::size_t level = cfg.depth; level-- > 0;) {
    h = ad::concat_channels(ad::upsample_nearest2(h), skips[level]);
    h = drop(ad::relu(ad::conv2d(h, params[j], params[j + 1], pad)));
    h = ad::conv2d(h, params[j + 2], params[j + 3], pad);
    if (level > 0) h = drop(ad::relu(h));
    j += 4;
  }
  return h;
}

Tensor s2s_loss(const UNetParams& params, const Tensor& h, const Tensor& mask, const UNetConfig& cfg,
                Rng* dropout_rng) {
  const MaskedSplit split = split_by_mask(h, mask);
  const Tensor pred = unet_forward(split.input, mask, params, cfg, dropout_rng);
  return ad::masked_sq_error(pred, h, expand_mask(mask, h.dim(1), /*complement=*/true));
}

UNetParams initial_params(const UNetConfig& ucfg, const DenoiserConfig& dcfg) {
  ucfg.validate();
  Rng init_rng = make_rng(dcfg.seed, {0x696e6974ULL});
  return init_unet(ucfg, init_rng);
}

TrainResult train(const ComplexMatrix& h_noisy, const UNetConfig& ucfg, const DenoiserConfig& dcfg) {
  ucfg.validate();
  dcfg.validate();
  const Tensor raw = complex_to_channels(h_noisy);
  check_spatial(raw, ucfg);

  TrainResult result;
  result.standardizer = Standardizer::fit(raw);
  const Tensor z = result.standardizer.apply(raw);
  Rng mask_rng = make_rng(dcfg.seed, {0x6d61736bULL});
  Rng drop_rng = make_rng(dcfg.seed, {0x64726f70ULL});
  result.params = initial_params(ucfg, dcfg);
  ad::AdamState adam(result.params, {.learning_rate = dcfg.learning_rate});
  result.loss_trace.reserve(dcfg.iterations);

  for (std::size_t it = 0; it < dcfg.iterations; ++it) {
    for (auto& p : result.params) p.zero_grad();
    const Tensor mask = sample_mask(z.dim(2), z.dim(3), dcfg.p_drop, mask_rng, &result.mask_resamples);
    const Tensor loss = s2s_loss(result.params, z, mask, ucfg, &drop_rng);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "training diverged at iteration " << it + 1 << ": loss = " << value;
      throw NumericError(os.str());
    }
    result.loss_trace.push_back(value);
    ad::backward(loss);
    ad::adam_step(result.params, adam);
  }
  return result;
}

Tensor predict_term(const UNetParams& params, const Tensor& h_std, const UNetConfig& ucfg, double p_drop,
                    Rng& rng) {
  const ad::NoGradGuard no_grad;
  const MaskedSplit split = bernoulli_sample(h_std, p_drop, rng);
  return unet_forward(split.input, split.mask, params, ucfg, &rng);
}

ComplexMatrix predict_ensemble(const UNetParams& params, const ComplexMatrix& h_noisy, const UNetConfig& ucfg,
                               const DenoiserConfig& dcfg, Rng& rng) {
  ucfg.validate();
  dcfg.validate();
  const Tensor raw = complex_to_channels(h_noisy);
  check_spatial(raw, ucfg);
  const Standardizer stdz = Standardizer::fit(raw);
  const Tensor z = stdz.apply(raw);

  const std::size_t t_count = dcfg.ensemble;
  std::vector<Rng> streams;
  streams.reserve(t_count);
  for (std::size_t t = 0; t < t_count; ++t) streams.push_back(split_rng(rng, t));

  std::vector<Tensor> terms(t_count);
  std::exception_ptr failure;
  const int threads = std::max(1, std::min(kernels::max_threads(), static_cast<int>(t_count)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t t = 0; t < t_count; ++t) {
    try {
      terms[t] = predict_term(params, z, ucfg, dcfg.p_drop, streams[t]);
    } catch (...) {
#pragma omp critical(chanest_predict_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> acc(z.size(), 0.0);
  for (const auto& term : terms) {
    const auto d = term.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
  }
  for (auto& v : acc) v /= static_cast<double>(t_count);
  return channels_to_complex(stdz.invert(Tensor::from_data(z.shape(), std::move(acc))));
}

DenoiseResult denoise(const ComplexMatrix& y, const ComplexMatrix& x, const UNetConfig& ucfg,
                      const DenoiserConfig& dcfg, const ComplexMatrix* truth) {
  DenoiseResult out;
  out.h_ls = est::ls_estimate(y, x);
  auto t0 = Clock::now();
  TrainResult trained = train(out.h_ls, ucfg, dcfg);
  out.report.train_seconds = seconds_since(t0);
  out.report.loss_trace = std::move(trained.loss_trace);
  out.report.mask_resamples = trained.mask_resamples;

  t0 = Clock::now();
  Rng predict_rng = make_rng(dcfg.seed, {0x70726564ULL});
  out.h_est = predict_ensemble(trained.params, out.h_ls, ucfg, dcfg, predict_rng);
  out.report.predict_seconds = seconds_since(t0);
  if (truth) {
    out.report.input_nmse = est::nmse(out.h_ls, *truth);
    out.report.output_nmse = est::nmse(out.h_est, *truth);
  }
  return out;
}

void save_params(const std::filesystem::path& path, const UNetParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("S2SC", 4);
  put_u32(os, kParamVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) {
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_f64(os, v);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

UNetParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "S2SC") throw IoError(path.string() + ": bad magic");
  const auto version = get_le(is, 4, path);
  if (version != kParamVersion) throw IoError(path.string() + ": unsupported version " + std::to_string(version));
  const auto count = get_le(is, 4, path);
  UNetParams params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rank = get_le(is, 4, path);
    if (rank == 0 || rank > 8) throw IoError(path.string() + ": bad tensor rank");
    ad::Shape shape(rank);
    for (auto& d : shape) d = get_le(is, 4, path);
    std::vector<double> data(ad::numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(get_le(is, 8, path));
    params.push_back(Tensor::from_data(std::move(shape), std::move(data), true));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return params;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "iter,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, trace[i]);
    os << buf;
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace chanest::s2s
