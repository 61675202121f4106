// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "chanest/ad/kernels.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace chanest::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstMapMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Fixed partition sizes; independent of the thread count.
constexpr std::size_t kColumnBlock = 256;
constexpr std::size_t kPatchBlock = 96;

std::size_t blocks_of(std::size_t total, std::size_t block) { return (total + block - 1) / block; }

std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

// col[(c*k + ky)*k + kx][y*ow + x] = padded input(c, y+ky-p, x+kx-p)
void im2col(const ConvDims& d, const double* image, double* col) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel, hw = oh * ow;
  const auto pad = static_cast<long>(d.padding);
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto rows = static_cast<long>(d.patch_size());
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / (k * k);
    const std::size_t ky = (static_cast<std::size_t>(r) / k) % k;
    const std::size_t kx = static_cast<std::size_t>(r) % k;
    const double* plane = image + c * d.height * d.width;
    double* dst = col + static_cast<std::size_t>(r) * hw;
    for (std::size_t y = 0; y < oh; ++y) {
      const long iy = static_cast<long>(y + ky) - pad;
      double* row = dst + y * ow;
      if (iy < 0 || iy >= H) {
        std::fill(row, row + ow, 0.0);
        continue;
      }
      const double* src = plane + iy * W;
      for (std::size_t x = 0; x < ow; ++x) {
        const long ix = static_cast<long>(x + kx) - pad;
        row[x] = (ix < 0 || ix >= W) ? 0.0 : src[ix];
      }
    }
  }
}

// Scatter-add of col2im; each input channel is owned by one thread.
void col2im_add(const ConvDims& d, const double* col, double* image) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel, hw = oh * ow;
  const auto pad = static_cast<long>(d.padding);
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto channels = static_cast<long>(d.in_channels);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < channels; ++c) {
    double* plane = image + static_cast<std::size_t>(c) * d.height * d.width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw;
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= H) continue;
          double* dst = plane + iy * W;
          for (std::size_t x = 0; x < ow; ++x) {
            const long ix = static_cast<long>(x + kx) - pad;
            if (ix >= 0 && ix < W) dst[ix] += src[y * ow + x];
          }
        }
      }
    }
  }
}


// Few-output-channel layers (the final 96->2 conv) are dominated by the
// im2col traffic, so they use shifted views of a zero-padded copy instead:
// with a padded row pitch Wp, tap (ky,kx) of output (y,x) reads flat index
// (y*Wp + x) + (ky*Wp + kx), so every tap is one GEMM over a contiguous slice.
constexpr std::size_t kShiftMaxOutChannels = 8;

struct PaddedGeometry {
  std::size_t channels, height, width, pad, kernel;
  std::size_t pitch() const { return width + 2 * pad; }
  // One spare row keeps the last tap's slice in bounds.
  std::size_t plane() const { return (height + 2 * pad + 1) * pitch(); }
  std::size_t out_height() const { return height + 2 * pad - kernel + 1; }
  std::size_t out_width() const { return width + 2 * pad - kernel + 1; }
};

void pad_copy(const PaddedGeometry& g, const double* image, std::vector<double>& padded) {
  const std::size_t pitch = g.pitch(), plane = g.plane();
  padded.assign(g.channels * plane, 0.0);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t y = 0; y < g.height; ++y) {
      std::copy_n(image + (c * g.height + y) * g.width, g.width, padded.data() + c * plane + (y + g.pad) * pitch + g.pad);
    }
  }
}

// out[o] (+)= sum_t taps[t] * shifted(padded); taps is [k*k][out][channels].
void shift_conv(const PaddedGeometry& g, const std::vector<double>& padded, const double* taps, std::size_t out_c,
                const double* bias, bool accumulate, double* out) {
  const std::size_t pitch = g.pitch(), plane = g.plane(), oh = g.out_height(), ow = g.out_width();
  const std::size_t span = oh * pitch, kk = g.kernel * g.kernel;
  auto& tmp = scratch(out_c * span);
  const auto nblocks = static_cast<long>(blocks_of(span, kColumnBlock));
#pragma omp parallel for schedule(static)
  for (long b = 0; b < nblocks; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * kColumnBlock;
    const auto width = static_cast<Eigen::Index>(std::min(kColumnBlock, span - start));
    MapMat dst(tmp.data() + start, static_cast<Eigen::Index>(out_c), width,
               Eigen::OuterStride<>(static_cast<Eigen::Index>(span)));
    for (std::size_t t = 0; t < kk; ++t) {
      const std::size_t offset = (t / g.kernel) * pitch + t % g.kernel;
      const ConstMapMat src(padded.data() + start + offset, static_cast<Eigen::Index>(g.channels), width,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      const ConstMapMat w(taps + t * out_c * g.channels, static_cast<Eigen::Index>(out_c),
                          static_cast<Eigen::Index>(g.channels),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(g.channels)));
      if (t == 0) {
        dst.noalias() = w * src;
      } else {
        dst.noalias() += w * src;
      }
    }
  }
  for (std::size_t o = 0; o < out_c; ++o) {
    const double b = bias ? bias[o] : 0.0;
    for (std::size_t y = 0; y < oh; ++y) {
      const double* src = tmp.data() + o * span + y * pitch;
      double* dst = out + (o * oh + y) * ow;
      if (accumulate) {
        for (std::size_t x = 0; x < ow; ++x) dst[x] += src[x];
      } else {
        for (std::size_t x = 0; x < ow; ++x) dst[x] = src[x] + b;
      }
    }
  }
}

void shift_forward(const ConvDims& d, const double* input, std::span<const double> weight,
                   std::span<const double> bias, double* output) {
  thread_local std::vector<double> padded, taps;
  const std::size_t kk = d.kernel * d.kernel;
  taps.resize(kk * d.out_channels * d.in_channels);
  for (std::size_t o = 0; o < d.out_channels; ++o)
    for (std::size_t c = 0; c < d.in_channels; ++c)
      for (std::size_t t = 0; t < kk; ++t)
        taps[(t * d.out_channels + o) * d.in_channels + c] = weight[(o * d.in_channels + c) * kk + t];
  const PaddedGeometry g{d.in_channels, d.height, d.width, d.padding, d.kernel};
  pad_copy(g, input, padded);
  shift_conv(g, padded, taps.data(), d.out_channels, bias.empty() ? nullptr : bias.data(), false, output);
}

void shift_backward(const ConvDims& d, const double* input, std::span<const double> weight, const double* gout,
                    double* grad_input, double* grad_weight) {
  thread_local std::vector<double> padded, gpad, taps;
  const std::size_t kk = d.kernel * d.kernel, oh = d.out_height(), ow = d.out_width();
  if (grad_weight) {
    // grad tap t = G * shifted(padded input)^T, with G laid out on the padded pitch.
    const PaddedGeometry g{d.in_channels, d.height, d.width, d.padding, d.kernel};
    pad_copy(g, input, padded);
    const std::size_t pitch = g.pitch(), plane = g.plane(), span = oh * pitch;
    gpad.assign(d.out_channels * span, 0.0);
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t y = 0; y < oh; ++y) std::copy_n(gout + (o * oh + y) * ow, ow, gpad.data() + o * span + y * pitch);
    taps.resize(kk * d.out_channels * d.in_channels);
    const ConstMapMat gm(gpad.data(), static_cast<Eigen::Index>(d.out_channels), static_cast<Eigen::Index>(span),
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(span)));
#pragma omp parallel for schedule(static)
    for (long t = 0; t < static_cast<long>(kk); ++t) {
      const std::size_t offset = (static_cast<std::size_t>(t) / d.kernel) * pitch + static_cast<std::size_t>(t) % d.kernel;
      const ConstMapMat src(padded.data() + offset, static_cast<Eigen::Index>(d.in_channels),
                            static_cast<Eigen::Index>(span), Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      MapMat dst(taps.data() + static_cast<std::size_t>(t) * d.out_channels * d.in_channels,
                 static_cast<Eigen::Index>(d.out_channels), static_cast<Eigen::Index>(d.in_channels),
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(d.in_channels)));
      dst.noalias() = gm * src.transpose();
    }
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t c = 0; c < d.in_channels; ++c)
        for (std::size_t t = 0; t < kk; ++t)
          grad_weight[(o * d.in_channels + c) * kk + t] += taps[(t * d.out_channels + o) * d.in_channels + c];
  }
  if (grad_input) {
    // Input gradient = convolution of the output gradient with the flipped,
    // transposed kernel and padding k-1-p.
    taps.resize(kk * d.in_channels * d.out_channels);
    for (std::size_t o = 0; o < d.out_channels; ++o)
      for (std::size_t c = 0; c < d.in_channels; ++c)
        for (std::size_t t = 0; t < kk; ++t)
          taps[((kk - 1 - t) * d.in_channels + c) * d.out_channels + o] = weight[(o * d.in_channels + c) * kk + t];
    const PaddedGeometry g{d.out_channels, oh, ow, d.kernel - 1 - d.padding, d.kernel};
    pad_copy(g, gout, padded);
    shift_conv(g, padded, taps.data(), d.in_channels, nullptr, true, grad_input);
  }
}

}  // namespace

void conv2d_forward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const std::size_t hw = d.out_height() * d.out_width();
  const std::size_t patch = d.patch_size();
  if (d.out_channels <= kShiftMaxOutChannels && d.padding < d.kernel) {
    for (std::size_t n = 0; n < d.batch; ++n) {
      shift_forward(d, input.data() + n * d.in_channels * d.height * d.width, weight, bias,
                    output.data() + n * d.out_channels * hw);
    }
    return;
  }
  auto& col = scratch(patch * hw);
  const ConstMapMat w(weight.data(), static_cast<Eigen::Index>(d.out_channels), static_cast<Eigen::Index>(patch),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(patch)));
  for (std::size_t n = 0; n < d.batch; ++n) {
    im2col(d, input.data() + n * d.in_channels * d.height * d.width, col.data());
    double* out = output.data() + n * d.out_channels * hw;
    const auto nblocks = static_cast<long>(blocks_of(hw, kColumnBlock));
#pragma omp parallel for schedule(static)
    for (long b = 0; b < nblocks; ++b) {
      const std::size_t start = static_cast<std::size_t>(b) * kColumnBlock;
      const auto width = static_cast<Eigen::Index>(std::min(kColumnBlock, hw - start));
      const ConstMapMat cols(col.data() + start, static_cast<Eigen::Index>(patch), width,
                             Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
      MapMat dst(out + start, static_cast<Eigen::Index>(d.out_channels), width,
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
      dst.noalias() = w * cols;
      if (!bias.empty()) {
        for (Eigen::Index o = 0; o < dst.rows(); ++o) dst.row(o).array() += bias[static_cast<std::size_t>(o)];
      }
    }
  }
}

void conv2d_backward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t hw = d.out_height() * d.out_width();
  const std::size_t patch = d.patch_size();
  const auto cout = static_cast<Eigen::Index>(d.out_channels);
  const ConstMapMat w(weight.data(), cout, static_cast<Eigen::Index>(patch),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(patch)));
  auto& col = scratch(patch * hw);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const double* gout_ptr = grad_output.data() + n * d.out_channels * hw;
    const ConstMapMat gout(gout_ptr, cout, static_cast<Eigen::Index>(hw),
                           Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
    if (!grad_bias.empty()) {
      // Plain loop: Eigen's vectorized reductions peel by pointer alignment,
      // which would make the summation order allocation-dependent.
      for (std::size_t o = 0; o < d.out_channels; ++o) {
        const double* row = gout_ptr + o * hw;
        double s = 0.0;
        for (std::size_t j = 0; j < hw; ++j) s += row[j];
        grad_bias[o] += s;
      }
    }
    if (d.out_channels <= kShiftMaxOutChannels && d.padding < d.kernel) {
      shift_backward(d, input.data() + n * d.in_channels * d.height * d.width, weight, gout_ptr,
                     grad_input.empty() ? nullptr : grad_input.data() + n * d.in_channels * d.height * d.width,
                     grad_weight.empty() ? nullptr : grad_weight.data());
      continue;
    }
    if (!grad_weight.empty()) {
      im2col(d, input.data() + n * d.in_channels * d.height * d.width, col.data());
      const auto nblocks = static_cast<long>(blocks_of(patch, kPatchBlock));
#pragma omp parallel for schedule(static)
      for (long b = 0; b < nblocks; ++b) {
        const std::size_t start = static_cast<std::size_t>(b) * kPatchBlock;
        const auto rows = static_cast<Eigen::Index>(std::min(kPatchBlock, patch - start));
        const ConstMapMat cols(col.data() + start * hw, rows, static_cast<Eigen::Index>(hw),
                               Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
        MapMat gw(grad_weight.data() + start, cout, rows, Eigen::OuterStride<>(static_cast<Eigen::Index>(patch)));
        gw.noalias() += gout * cols.transpose();
      }
    }
    if (!grad_input.empty()) {
      const auto nblocks = static_cast<long>(blocks_of(hw, kColumnBlock));
#pragma omp parallel for schedule(static)
      for (long b = 0; b < nblocks; ++b) {
        const std::size_t start = static_cast<std::size_t>(b) * kColumnBlock;
        const auto width = static_cast<Eigen::Index>(std::min(kColumnBlock, hw - start));
        const ConstMapMat g(gout_ptr + start, cout, width, Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
        MapMat dcol(col.data() + start, static_cast<Eigen::Index>(patch), width,
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
        dcol.noalias() = w.transpose() * g;
      }
      col2im_add(d, col.data(), grad_input.data() + n * d.in_channels * d.height * d.width);
    }
  }
}

void mask_window_sum(const ConvDims& d, std::span<const double> mask, std::span<double> window_sum) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto pad = static_cast<long>(d.padding);
  const auto rows = static_cast<long>(d.batch * oh);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / oh, y = static_cast<std::size_t>(r) % oh;
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long iy = static_cast<long>(y + ky) - pad;
        if (iy < 0 || iy >= H) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long ix = static_cast<long>(x + kx) - pad;
          if (ix >= 0 && ix < W) s += mask[(n * d.height + iy) * d.width + ix];
        }
      }
      window_sum[static_cast<std::size_t>(r) * ow + x] = s;
    }
  }
}

void maxpool2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output,
                      std::span<std::size_t> argmax) {
  const std::size_t oh = d.height / 2, ow = d.width / 2;
  const auto planes = static_cast<long>(d.batch * d.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * d.height * d.width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t i0 = base + 2 * y * d.width + 2 * x;
        const std::size_t cand[4] = {i0, i0 + 1, i0 + d.width, i0 + d.width + 1};
        std::size_t where = cand[0];
        for (int j = 1; j < 4; ++j) {
          if (input[cand[j]] > input[where]) where = cand[j];
        }
        const std::size_t o = (static_cast<std::size_t>(p) * oh + y) * ow + x;
        output[o] = input[where];
        argmax[o] = where;
      }
    }
  }
}

void maxpool2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<const std::size_t> argmax,
                       std::span<double> grad_input) {
  // Windows are disjoint, so the scatter is race-free.
  const auto count = static_cast<long>(d.batch * d.channels * (d.height / 2) * (d.width / 2));
#pragma omp parallel for schedule(static)
  for (long o = 0; o < count; ++o) grad_input[argmax[o]] += grad_output[o];
}

void upsample2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output) {
  const std::size_t oh = 2 * d.height, ow = 2 * d.width;
  const auto planes = static_cast<long>(d.batch * d.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const double* src = input.data() + static_cast<std::size_t>(p) * d.height * d.width;
    double* dst = output.data() + static_cast<std::size_t>(p) * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const double* s = src + (y / 2) * d.width;
      double* row = dst + y * ow;
      for (std::size_t x = 0; x < d.width; ++x) {
        row[2 * x] = s[x];
        row[2 * x + 1] = s[x];
      }
    }
  }
}

void upsample2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<double> grad_input) {
  const std::size_t oh = 2 * d.height, ow = 2 * d.width;
  const auto planes = static_cast<long>(d.batch * d.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const double* src = grad_output.data() + static_cast<std::size_t>(p) * oh * ow;
    double* dst = grad_input.data() + static_cast<std::size_t>(p) * d.height * d.width;
    for (std::size_t y = 0; y < d.height; ++y) {
      const double* r0 = src + 2 * y * ow;
      const double* r1 = r0 + ow;
      for (std::size_t x = 0; x < d.width; ++x) {
        dst[y * d.width + x] += (r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1]);
      }
    }
  }
}

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_max_threads(int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace chanest::kernels
