// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/ad/ops.hpp"

#include <algorithm>
#include <memory>
#include <utility>
#include <vector>

#include "chanest/ad/kernels.hpp"

namespace chanest::ad {

namespace {

using detail::Node;

bool needs_tape(std::initializer_list<const Tensor*> inputs) {
  if (!grad_mode_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->defined() && t->requires_grad(); });
}

// Builds the output node; `backward` is attached only when recording.
Tensor make_output(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  if (needs_tape(inputs)) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const Tensor* t : inputs) {
      if (t->defined()) node.parents.push_back(t->node());
    }
    node.backward = std::move(backward);
  }
  return out;
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + " is undefined");
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " + to_string(t.shape()));
  }
}

kernels::ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t padding) {
  expect_rank(input, 4, "conv input");
  expect_rank(kernel, 4, "conv kernel");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  if (ks[1] != is[1]) {
    throw ShapeError("conv kernel expects " + std::to_string(ks[1]) + " input channels, input " + to_string(is) +
                     " has " + std::to_string(is[1]));
  }
  if (ks[2] != ks[3] || ks[2] % 2 == 0) throw ShapeError("conv kernel must be square and odd: " + to_string(ks));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ks[0])) {
    throw ShapeError("conv bias " + to_string(bias.shape()) + " does not match " + std::to_string(ks[0]) +
                     " output channels");
  }
  if (is[2] + 2 * padding < ks[2] || is[3] + 2 * padding < ks[2]) {
    throw ShapeError("conv input " + to_string(is) + " smaller than kernel " + to_string(ks));
  }
  return kernels::ConvDims{is[0], is[1], is[2], is[3], ks[0], ks[2], padding};
}

kernels::PoolDims pool_dims(const Tensor& t) {
  expect_rank(t, 4, "pool input");
  return kernels::PoolDims{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + (a.defined() ? to_string(a.shape()) : "()") +
                     " vs " + (b.defined() ? to_string(b.shape()) : "()"));
  }
}

void expect_binary(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (x != 0.0 && x != 1.0) throw ValueError(std::string(what) + " must contain only 0 and 1");
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t padding) {
  const auto d = conv_dims(input, kernel, bias, padding);
  std::vector<double> out(d.output_size());
  kernels::conv2d_forward(d, input.data(), kernel.data(), bias.defined() ? bias.data() : std::span<const double>{},
                          out);
  Shape shape{d.batch, d.out_channels, d.out_height(), d.out_width()};
  auto in_node = input.node(), k_node = kernel.node(), b_node = bias.defined() ? bias.node() : nullptr;
  return make_output(std::move(shape), std::move(out), {&input, &kernel, &bias}, [=](Node& self) {
    kernels::conv2d_backward(d, in_node->data, k_node->data, self.grad,
                             in_node->requires_grad ? std::span<double>(in_node->grad) : std::span<double>{},
                             k_node->requires_grad ? std::span<double>(k_node->grad) : std::span<double>{},
                             b_node && b_node->requires_grad ? std::span<double>(b_node->grad) : std::span<double>{});
  });
}

PartialConvResult pconv2d(const Tensor& input, const Tensor& mask, const Tensor& kernel, const Tensor& bias,
                          std::size_t padding) {
  const auto d = conv_dims(input, kernel, bias, padding);
  expect_rank(mask, 4, "pconv mask");
  if (mask.dim(0) != d.batch || mask.dim(1) != 1 || mask.dim(2) != d.height || mask.dim(3) != d.width) {
    throw ShapeError("pconv mask " + to_string(mask.shape()) + " does not match input " + to_string(input.shape()));
  }
  expect_binary(mask.data(), "pconv mask");

  const std::size_t plane = d.height * d.width;
  const std::size_t oplane = d.out_height() * d.out_width();
  auto masked = std::make_shared<std::vector<double>>(input.data().begin(), input.data().end());
  const auto m = mask.data();
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t c = 0; c < d.in_channels; ++c) {
      double* p = masked->data() + (n * d.in_channels + c) * plane;
      const double* mp = m.data() + n * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] *= mp[i];
    }
  }

  // ratio = window_size / mask_sum where the window saw valid input, else 0.
  auto ratio = std::make_shared<std::vector<double>>(d.batch * oplane);
  kernels::mask_window_sum(d, m, *ratio);
  std::vector<double> new_mask(ratio->size());
  const double window = static_cast<double>(d.kernel * d.kernel);
  for (std::size_t i = 0; i < ratio->size(); ++i) {
    const double s = (*ratio)[i];
    new_mask[i] = s > 0.0 ? 1.0 : 0.0;
    (*ratio)[i] = s > 0.0 ? window / s : 0.0;
  }

  std::vector<double> out(d.output_size());
  kernels::conv2d_forward(d, *masked, kernel.data(), {}, out);
  const bool has_bias = bias.defined();
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      double* p = out.data() + (n * d.out_channels + o) * oplane;
      const double* r = ratio->data() + n * oplane;
      const double b = has_bias ? bias.data()[o] : 0.0;
      for (std::size_t i = 0; i < oplane; ++i) p[i] = r[i] > 0.0 ? p[i] * r[i] + b : 0.0;
    }
  }

  Shape shape{d.batch, d.out_channels, d.out_height(), d.out_width()};
  auto in_node = input.node(), k_node = kernel.node(), b_node = has_bias ? bias.node() : nullptr;
  auto mask_node = mask.node();
  Tensor result = make_output(std::move(shape), std::move(out), {&input, &kernel, &bias}, [=](Node& self) {
    std::vector<double> graw(self.grad.size());
    for (std::size_t n = 0; n < d.batch; ++n) {
      for (std::size_t o = 0; o < d.out_channels; ++o) {
        const std::size_t base = (n * d.out_channels + o) * oplane;
        const double* r = ratio->data() + n * oplane;
        double gb = 0.0;
        for (std::size_t i = 0; i < oplane; ++i) {
          const double g = self.grad[base + i];
          graw[base + i] = g * r[i];
          if (r[i] > 0.0) gb += g;
        }
        if (b_node && b_node->requires_grad) b_node->grad[o] += gb;
      }
    }
    std::vector<double> gmasked;
    if (in_node->requires_grad) gmasked.assign(masked->size(), 0.0);
    kernels::conv2d_backward(d, *masked, k_node->data, graw, gmasked,
                             k_node->requires_grad ? std::span<double>(k_node->grad) : std::span<double>{}, {});
    if (in_node->requires_grad) {
      for (std::size_t n = 0; n < d.batch; ++n) {
        for (std::size_t c = 0; c < d.in_channels; ++c) {
          const std::size_t base = (n * d.in_channels + c) * plane;
          const double* mp = mask_node->data.data() + n * plane;
          for (std::size_t i = 0; i < plane; ++i) in_node->grad[base + i] += gmasked[base + i] * mp[i];
        }
      }
    }
  });
  return {std::move(result), Tensor::from_data({d.batch, 1, d.out_height(), d.out_width()}, std::move(new_mask))};
}

Tensor maxpool2(const Tensor& input) {
  const auto d = pool_dims(input);
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    throw ShapeError("maxpool2 needs even spatial dims, got " + to_string(input.shape()));
  }
  const std::size_t count = d.batch * d.channels * (d.height / 2) * (d.width / 2);
  std::vector<double> out(count);
  auto argmax = std::make_shared<std::vector<std::size_t>>(count);
  kernels::maxpool2_forward(d, input.data(), out, *argmax);
  auto in_node = input.node();
  return make_output({d.batch, d.channels, d.height / 2, d.width / 2}, std::move(out), {&input},
                     [=](Node& self) { kernels::maxpool2_backward(d, self.grad, *argmax, in_node->grad); });
}

Tensor upsample_nearest2(const Tensor& input) {
  const auto d = pool_dims(input);
  std::vector<double> out(input.size() * 4);
  kernels::upsample2_forward(d, input.data(), out);
  auto in_node = input.node();
  return make_output({d.batch, d.channels, 2 * d.height, 2 * d.width}, std::move(out), {&input},
                     [=](Node& self) { kernels::upsample2_backward(d, self.grad, in_node->grad); });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  expect_rank(a, 4, "concat operand");
  if (!b.defined()) return a;
  expect_rank(b, 4, "concat operand");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels spatial mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const std::size_t N = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
  const std::size_t sa = ca * plane, sb = cb * plane;
  std::vector<double> out(N * (sa + sb));
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a.data().data() + n * sa, sa, out.data() + n * (sa + sb));
    std::copy_n(b.data().data() + n * sb, sb, out.data() + n * (sa + sb) + sa);
  }
  auto an = a.node(), bn = b.node();
  return make_output({N, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {&a, &b}, [=](Node& self) {
    for (std::size_t n = 0; n < N; ++n) {
      const double* g = self.grad.data() + n * (sa + sb);
      if (an->requires_grad) {
        for (std::size_t i = 0; i < sa; ++i) an->grad[n * sa + i] += g[i];
      }
      if (bn->requires_grad) {
        for (std::size_t i = 0; i < sb; ++i) bn->grad[n * sb + i] += g[sa + i];
      }
    }
  });
}

Tensor relu(const Tensor& input) {
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  auto in_node = input.node();
  return make_output(input.shape(), std::move(out), {&input}, [=](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in_node->data[i] > 0.0) in_node->grad[i] += self.grad[i];
    }
  });
}

Tensor dropout(const Tensor& input, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValueError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  if (rate == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto scale = std::make_shared<std::vector<double>>(input.size());
  for (auto& s : *scale) s = uniform01(rng) < rate ? 0.0 : keep_scale;
  const auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (*scale)[i];
  auto in_node = input.node();
  return make_output(input.shape(), std::move(out), {&input}, [=](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) in_node->grad[i] += self.grad[i] * (*scale)[i];
  });
}

Tensor masked_sq_error(const Tensor& pred, const Tensor& target, const Tensor& weight) {
  expect_same_shape(pred, target, "masked_sq_error pred/target");
  expect_same_shape(pred, weight, "masked_sq_error pred/weight");
  expect_binary(weight.data(), "masked_sq_error weight");
  const auto p = pred.data(), t = target.data(), w = weight.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    acc += w[i] * e * e;
  }
  auto pn = pred.node(), tn = target.node(), wn = weight.node();
  return make_output({1}, {acc}, {&pred}, [=](Node& self) {
    const double g = self.grad[0];
    for (std::size_t i = 0; i < pn->data.size(); ++i) {
      pn->grad[i] += g * 2.0 * wn->data[i] * (pn->data[i] - tn->data[i]);
    }
  });
}

Tensor weighted_sum(const Tensor& input, const Tensor& coeffs) {
  expect_same_shape(input, coeffs, "weighted_sum");
  const auto x = input.data(), c = coeffs.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += c[i] * x[i];
  auto in_node = input.node(), cn = coeffs.node();
  return make_output({1}, {acc}, {&input}, [=](Node& self) {
    const double g = self.grad[0];
    for (std::size_t i = 0; i < in_node->grad.size(); ++i) in_node->grad[i] += g * cn->data[i];
  });
}

Tensor mul_constant(const Tensor& input, const Tensor& factor) {
  const auto x = input.data(), f = factor.data();
  std::vector<double> out(x.size());
  std::size_t channels = 1, plane = x.size();
  if (factor.shape() == input.shape()) {
    channels = 1;
  } else if (input.rank() == 4 && factor.rank() == 4 && factor.dim(1) == 1 && factor.dim(0) == input.dim(0) &&
             factor.dim(2) == input.dim(2) && factor.dim(3) == input.dim(3)) {
    channels = input.dim(1);
    plane = input.dim(2) * input.dim(3);
  } else {
    throw ShapeError("mul_constant cannot broadcast " + to_string(factor.shape()) + " onto " +
                     to_string(input.shape()));
  }
  // Flat index i maps to factor index (i / (channels*plane)) * plane + i % plane.
  auto index = [channels, plane](std::size_t i) { return (i / (channels * plane)) * plane + i % plane; };
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * f[index(i)];
  auto in_node = input.node(), fn = factor.node();
  return make_output(input.shape(), std::move(out), {&input}, [=](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) in_node->grad[i] += self.grad[i] * fn->data[index(i)];
  });
}

}  // namespace chanest::ad
