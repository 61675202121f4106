// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_S2S_DENOISER_HPP_
#define CHANEST_S2S_DENOISER_HPP_

// One-shot blind-spot denoising of a noisy channel estimate. A PConv U-Net is
// trained on Bernoulli-masked copies of the single input and evaluated as a
// dropout ensemble over fresh masks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "chanest/ad/tensor.hpp"
#include "chanest/common.hpp"
#include "chanest/sim/channel.hpp"

namespace chanest::s2s {

using ad::Tensor;
using sim::ComplexMatrix;

struct UNetConfig {
  std::size_t depth = 5;
  std::size_t in_channels = 2;
  std::size_t base_width = 48;
  std::size_t wide_width = 96;
  std::size_t kernel = 3;
  double dropout = 0.3;

  void validate() const;
};

struct DenoiserConfig {
  double p_drop = 0.3;
  std::size_t iterations = 2000;
  std::size_t ensemble = 50;
  double learning_rate = 1e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Flat parameter list: (weight, bias) per contracting stage, then
/// (weight, bias, weight, bias) per expansive level from deepest to top.
using UNetParams = std::vector<Tensor>;

/// Channel 0 holds real parts, channel 1 imaginary parts: [1,2,Nr,Nt].
Tensor complex_to_channels(const ComplexMatrix& h);
ComplexMatrix channels_to_complex(const Tensor& t);

/// Joint mean / standard deviation of all real and imaginary entries.
struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;

  static Standardizer fit(const Tensor& t);
  Tensor apply(const Tensor& t) const;
  Tensor invert(const Tensor& t) const;
};

struct MaskedSplit {
  Tensor input;  // B * H, the network input
  Tensor blind;  // (1 - B) * H, the label support
  Tensor mask;   // B as [1,1,H,W]; 1 = kept
};

/// Splits `h` ([1,C,H,W]) by an explicit mask shared across channels.
MaskedSplit split_by_mask(const Tensor& h, const Tensor& mask);

/// Draws B with P(B=1) = 1 - p_drop per entry; all-zero or all-one draws are
/// redrawn and counted in `resamples` when given. Throws ValueError after
/// 10000 degenerate draws in a row.
Tensor sample_mask(std::size_t height, std::size_t width, double p_drop, Rng& rng,
                   std::size_t* resamples = nullptr);

MaskedSplit bernoulli_sample(const Tensor& h, double p_drop, Rng& rng, std::size_t* resamples = nullptr);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.
UNetParams init_unet(const UNetConfig& cfg, Rng& rng);

std::size_t parameter_count(const UNetParams& params);

/// `dropout_rng == nullptr` disables dropout.
Tensor unet_forward(const Tensor& input, const Tensor& mask, const UNetParams& params, const UNetConfig& cfg,
                    Rng* dropout_rng);

/// Squared error of the prediction from the masked input, on blind entries only.
Tensor s2s_loss(const UNetParams& params, const Tensor& h, const Tensor& mask, const UNetConfig& cfg,
                Rng* dropout_rng);

/// The network `train` starts from for this seed.
UNetParams initial_params(const UNetConfig& ucfg, const DenoiserConfig& dcfg);

struct TrainResult {
  UNetParams params;
  std::vector<double> loss_trace;
  Standardizer standardizer;
  std::size_t mask_resamples = 0;
};

/// Trains on the standardized version of `h_noisy`. Throws NumericError on a
/// non-finite loss.
TrainResult train(const ComplexMatrix& h_noisy, const UNetConfig& ucfg, const DenoiserConfig& dcfg);

/// One ensemble term on a standardized input: fresh mask, then fresh dropout,
/// both drawn from `rng`. Result is still standardized.
Tensor predict_term(const UNetParams& params, const Tensor& h_std, const UNetConfig& ucfg, double p_drop, Rng& rng);

/// Average of dcfg.ensemble terms. Term t uses split_rng(rng, t), split in
/// order before any term runs; the sum is accumulated in term order.
ComplexMatrix predict_ensemble(const UNetParams& params, const ComplexMatrix& h_noisy, const UNetConfig& ucfg,
                               const DenoiserConfig& dcfg, Rng& rng);

struct DenoiseReport {
  std::vector<double> loss_trace;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  std::size_t mask_resamples = 0;
  std::optional<double> input_nmse;
  std::optional<double> output_nmse;
};

struct DenoiseResult {
  ComplexMatrix h_est;
  ComplexMatrix h_ls;
  DenoiseReport report;
};

/// LS, then training, then ensemble prediction. NMSEs are filled in when the
/// true channel is supplied.
DenoiseResult denoise(const ComplexMatrix& y, const ComplexMatrix& x, const UNetConfig& ucfg,
                      const DenoiserConfig& dcfg, const ComplexMatrix* truth = nullptr);

/// Binary parameter file: "S2SC", u32 version, u32 tensor count, then per
/// tensor u32 rank, u32 dims, little-endian doubles.
void save_params(const std::filesystem::path& path, const UNetParams& params);
UNetParams load_params(const std::filesystem::path& path);

/// CSV with header `iter,loss`, iterations counted from 1.
void write_loss_trace(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace chanest::s2s

#endif  // CHANEST_S2S_DENOISER_HPP_
