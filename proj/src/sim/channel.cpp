// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/sim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

namespace chanest::sim {

namespace {

constexpr double kPi = std::numbers::pi;
// Cluster centres are drawn from (-kCentreRange, kCentreRange).
constexpr double kCentreRange = kPi / 3.0;
constexpr double kAngleLimit = kPi / 2.0 - 1e-3;

double clamp_angle(double a) { return std::clamp(a, -kAngleLimit, kAngleLimit); }

Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

// Columns are vec(scale * a_rx(aoa_p) a_tx(aod_p)^H).
ComplexMatrix path_basis(const ChannelGeometry& g) {
  const double scale = std::sqrt(static_cast<double>(g.n_rx * g.n_tx) / static_cast<double>(g.paths.size()));
  ComplexMatrix v(static_cast<Eigen::Index>(g.n_rx * g.n_tx), static_cast<Eigen::Index>(g.paths.size()));
  for (std::size_t p = 0; p < g.paths.size(); ++p) {
    const ComplexMatrix outer =
        scale * steering_vector(g.n_rx, g.paths[p].aoa) * steering_vector(g.n_tx, g.paths[p].aod).adjoint();
    v.col(static_cast<Eigen::Index>(p)) = vec(outer);
  }
  return v;
}

}  // namespace

void ChannelModelConfig::validate() const {
  if (n_rx == 0 || n_tx == 0) throw ValueError("n_rx and n_tx must be positive");
  if (n_paths == 0) throw ValueError("n_paths must be at least 1");
  if (!(los_power > 0.0 && los_power <= 1.0)) throw ValueError("los_power must lie in (0,1]");
  if (los && n_paths > 1 && los_power >= 1.0) throw ValueError("los_power must be < 1 when NLOS paths exist");
  if (!(angle_spread >= 0.0) || !std::isfinite(angle_spread)) throw ValueError("angle_spread must be >= 0");
  if (!std::isfinite(los_aoa_offset)) throw ValueError("los_aoa_offset must be finite");
}

void MobilityScenario::validate() const {
  if (n_frames == 0) throw ValueError("n_frames must be positive");
  if (hold_frames > n_frames) throw ValueError("hold_frames cannot exceed n_frames");
  if (!std::isfinite(aoa_drift)) throw ValueError("aoa_drift must be finite");
}

ComplexVector steering_vector(std::size_t n, double angle) {
  ComplexVector a(static_cast<Eigen::Index>(n));
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  const double phase = -kPi * std::sin(angle);
  for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i)) = std::polar(norm, phase * static_cast<double>(i));
  return a;
}

ChannelGeometry channel_geometry(const ChannelModelConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, {0x6765'6f6dULL});
  std::uniform_real_distribution<double> centre(-kCentreRange, kCentreRange);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::normal_distribution<double> offset(0.0, 1.0);

  ChannelGeometry g;
  g.n_rx = cfg.n_rx;
  g.n_tx = cfg.n_tx;
  g.los = cfg.los;
  const double c_rx = centre(rng);
  const double c_tx = centre(rng);
  const double los_phase = phase(rng);
  const auto P = static_cast<double>(cfg.n_paths);
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    if (p == 0 && cfg.los) {
      g.paths.push_back({clamp_angle(c_rx + cfg.los_aoa_offset), c_tx});
    } else {
      const double aoa = clamp_angle(c_rx + cfg.angle_spread * offset(rng));
      const double aod = clamp_angle(c_tx + cfg.angle_spread * offset(rng));
      g.paths.push_back({aoa, aod});
    }
  }
  if (cfg.los) {
    const double los_share = cfg.n_paths == 1 ? 1.0 : cfg.los_power;
    g.los_gain = std::polar(std::sqrt(P * los_share), los_phase);
    g.nlos_variance = cfg.n_paths == 1 ? 0.0 : P * (1.0 - los_share) / (P - 1.0);
  } else {
    g.nlos_variance = 1.0;
  }
  return g;
}

ComplexVector draw_path_gains(const ChannelGeometry& geometry, Rng& rng) {
  ComplexVector gains(static_cast<Eigen::Index>(geometry.paths.size()));
  for (std::size_t p = 0; p < geometry.paths.size(); ++p) {
    gains(static_cast<Eigen::Index>(p)) =
        (p == 0 && geometry.los) ? geometry.los_gain : complex_normal(rng, geometry.nlos_variance);
  }
  return gains;
}

ComplexMatrix synthesize_channel(const ChannelGeometry& geometry, const ComplexVector& gains) {
  if (static_cast<std::size_t>(gains.size()) != geometry.paths.size()) {
    throw ShapeError("one gain per path required");
  }
  const double scale =
      std::sqrt(static_cast<double>(geometry.n_rx * geometry.n_tx) / static_cast<double>(geometry.paths.size()));
  ComplexMatrix h = ComplexMatrix::Zero(static_cast<Eigen::Index>(geometry.n_rx),
                                        static_cast<Eigen::Index>(geometry.n_tx));
  for (std::size_t p = 0; p < geometry.paths.size(); ++p) {
    h += (scale * gains(static_cast<Eigen::Index>(p))) * steering_vector(geometry.n_rx, geometry.paths[p].aoa) *
         steering_vector(geometry.n_tx, geometry.paths[p].aod).adjoint();
  }
  return h;
}

ComplexMatrix gen_channel(const ChannelModelConfig& cfg, Rng& rng) {
  const auto g = channel_geometry(cfg);
  return synthesize_channel(g, draw_path_gains(g, rng));
}

ComplexMatrix gen_pilots(std::size_t n_tx, std::size_t pilot_len) {
  if (n_tx == 0) throw ValueError("n_tx must be positive");
  if (pilot_len < n_tx) {
    throw ValueError("pilot length " + std::to_string(pilot_len) + " shorter than n_tx " + std::to_string(n_tx) +
                     ": LS would be underdetermined");
  }
  ComplexMatrix x(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(pilot_len));
  for (std::size_t t = 0; t < n_tx; ++t) {
    for (std::size_t l = 0; l < pilot_len; ++l) {
      // Reduce t*l mod L first so the phase is exact for the quarter points.
      const std::size_t k = (t * l) % pilot_len;
      const double phase = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(pilot_len);
      Complex v(std::cos(phase), std::sin(phase));
      if (4 * k % pilot_len == 0) {
        // Snap multiples of pi/2 so e.g. the 4-point DFT is exactly {1,-i,-1,i}.
        const std::size_t q = 4 * k / pilot_len;
        static constexpr double re[4] = {1, 0, -1, 0}, im[4] = {0, -1, 0, 1};
        v = {re[q], im[q]};
      }
      x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = v;
    }
  }
  return x;
}

Received transmit(const ComplexMatrix& h, const ComplexMatrix& x, double snr_db, Rng& rng) {
  if (h.cols() != x.rows()) {
    throw ShapeError("transmit: H has " + std::to_string(h.cols()) + " columns but X has " +
                     std::to_string(x.rows()) + " rows");
  }
  Received r;
  r.y = h * x;
  if (std::isinf(snr_db) && snr_db > 0) return r;
  const double signal = frobenius_sq(r.y) / static_cast<double>(r.y.rows() * r.y.cols());
  r.noise_variance = signal / std::pow(10.0, snr_db / 10.0);
  for (Eigen::Index j = 0; j < r.y.cols(); ++j) {
    for (Eigen::Index i = 0; i < r.y.rows(); ++i) r.y(i, j) += complex_normal(rng, r.noise_variance);
  }
  return r;
}

ComplexMatrix channel_correlation(const ChannelModelConfig& cfg, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ValueError("channel_correlation needs at least one sample");
  const auto g = channel_geometry(cfg);
  // h_i = V g_i, so (1/n) sum h_i h_i^H = V [(1/n) sum g_i g_i^H] V^H.
  const auto P = static_cast<Eigen::Index>(g.paths.size());
  ComplexMatrix gain_corr = ComplexMatrix::Zero(P, P);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const ComplexVector gi = draw_path_gains(g, rng);
    gain_corr += gi * gi.adjoint();
  }
  gain_corr /= static_cast<double>(n_samples);
  const ComplexMatrix v = path_basis(g);
  ComplexMatrix r = v * gain_corr * v.adjoint();
  // Exact Hermitian symmetry despite rounding in the triple product.
  return (r + r.adjoint()) * 0.5;
}

ComplexMatrix scenario_correlation(const ChannelModelConfig& cfg, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ValueError("scenario_correlation needs at least one sample");
  cfg.validate();
  const auto dim = static_cast<Eigen::Index>(cfg.n_rx * cfg.n_tx);
  ComplexMatrix r = ComplexMatrix::Zero(dim, dim);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < n_samples; start += kChunk) {
    const std::size_t count = std::min(kChunk, n_samples - start);
    ComplexMatrix w(dim, static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      ChannelModelConfig draw = cfg;
      draw.seed = rng();
      w.col(static_cast<Eigen::Index>(i)) = vec(gen_channel(draw, rng));
    }
    r.selfadjointView<Eigen::Lower>().rankUpdate(w);
  }
  r = r.selfadjointView<Eigen::Lower>();
  return r / static_cast<double>(n_samples);
}

ChannelModelConfig frame_config(const ChannelModelConfig& cfg, const MobilityScenario& scenario, std::size_t frame) {
  scenario.validate();
  if (frame < 1 || frame > scenario.n_frames) {
    throw ValueError("frame " + std::to_string(frame) + " outside 1.." + std::to_string(scenario.n_frames));
  }
  ChannelModelConfig out = cfg;
  if (frame > scenario.hold_frames) {
    out.los_aoa_offset += scenario.aoa_drift * static_cast<double>(frame - scenario.hold_frames);
  }
  return out;
}

ComplexMatrix evolve_channel(const ChannelModelConfig& cfg, const MobilityScenario& scenario, std::size_t frame,
                             Rng rng) {
  const ChannelModelConfig moved = frame_config(cfg, scenario, frame);
  if (frame <= scenario.hold_frames) return gen_channel(moved, rng);
  Rng frame_rng = make_rng(rng(), {frame});
  return gen_channel(moved, frame_rng);
}

ComplexVector vec(const ComplexMatrix& m) { return m.reshaped(); }

double frobenius_sq(const ComplexMatrix& m) { return m.squaredNorm(); }

std::uint64_t content_hash(std::initializer_list<const ComplexMatrix*> matrices) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* m : matrices) {
    const std::int64_t dims[2] = {m->rows(), m->cols()};
    mix(dims, sizeof(dims));
    mix(m->data(), static_cast<std::size_t>(m->size()) * sizeof(Complex));
  }
  return h;
}

}  // namespace chanest::sim
