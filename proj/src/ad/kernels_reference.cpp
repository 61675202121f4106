// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include <cstddef>
#include <limits>

#include "chanest/ad/kernels.hpp"

namespace chanest::kernels::reference {

void conv2d_forward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto pad = static_cast<long>(d.padding);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < d.in_channels; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long iy = static_cast<long>(y + ky) - pad;
              if (iy < 0 || iy >= H) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = static_cast<long>(x + kx) - pad;
                if (ix < 0 || ix >= W) continue;
                acc += weight[((o * d.in_channels + c) * k + ky) * k + kx] *
                       input[((n * d.in_channels + c) * d.height + iy) * d.width + ix];
              }
            }
          }
          output[((n * d.out_channels + o) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
}

void conv2d_backward(const ConvDims& d, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto pad = static_cast<long>(d.padding);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double g = grad_output[((n * d.out_channels + o) * oh + y) * ow + x];
          if (!grad_bias.empty()) grad_bias[o] += g;
          for (std::size_t c = 0; c < d.in_channels; ++c) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long iy = static_cast<long>(y + ky) - pad;
              if (iy < 0 || iy >= H) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = static_cast<long>(x + kx) - pad;
                if (ix < 0 || ix >= W) continue;
                const std::size_t wi = ((o * d.in_channels + c) * k + ky) * k + kx;
                const std::size_t ii = ((n * d.in_channels + c) * d.height + iy) * d.width + ix;
                if (!grad_weight.empty()) grad_weight[wi] += g * input[ii];
                if (!grad_input.empty()) grad_input[ii] += g * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

void mask_window_sum(const ConvDims& d, std::span<const double> mask, std::span<double> window_sum) {
  const std::size_t oh = d.out_height(), ow = d.out_width(), k = d.kernel;
  const auto H = static_cast<long>(d.height), W = static_cast<long>(d.width);
  const auto pad = static_cast<long>(d.padding);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double s = 0.0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= H) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(x + kx) - pad;
            if (ix < 0 || ix >= W) continue;
            s += mask[(n * d.height + iy) * d.width + ix];
          }
        }
        window_sum[(n * oh + y) * ow + x] = s;
      }
    }
  }
}

void maxpool2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output,
                      std::span<std::size_t> argmax) {
  const std::size_t oh = d.height / 2, ow = d.width / 2;
  for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t where = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t i = (p * d.height + 2 * y + dy) * d.width + 2 * x + dx;
            if (input[i] > best || (dy == 0 && dx == 0)) {
              best = input[i];
              where = i;
            }
          }
        }
        const std::size_t o = (p * oh + y) * ow + x;
        output[o] = best;
        argmax[o] = where;
      }
    }
  }
}

void maxpool2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<const std::size_t> argmax,
                       std::span<double> grad_input) {
  const std::size_t count = d.batch * d.channels * (d.height / 2) * (d.width / 2);
  for (std::size_t o = 0; o < count; ++o) grad_input[argmax[o]] += grad_output[o];
}

void upsample2_forward(const PoolDims& d, std::span<const double> input, std::span<double> output) {
  const std::size_t oh = 2 * d.height, ow = 2 * d.width;
  for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        output[(p * oh + y) * ow + x] = input[(p * d.height + y / 2) * d.width + x / 2];
      }
    }
  }
}

void upsample2_backward(const PoolDims& d, std::span<const double> grad_output, std::span<double> grad_input) {
  const std::size_t oh = 2 * d.height, ow = 2 * d.width;
  for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        grad_input[(p * d.height + y / 2) * d.width + x / 2] += grad_output[(p * oh + y) * ow + x];
      }
    }
  }
}

}  // namespace chanest::kernels::reference
