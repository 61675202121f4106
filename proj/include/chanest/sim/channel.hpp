// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_SIM_CHANNEL_HPP_
#define CHANEST_SIM_CHANNEL_HPP_

// Synthetic narrowband MIMO link: geometric multipath channels between two
// half-wavelength uniform linear arrays, DFT pilots, and AWGN.
//
//   H = sqrt(Nr*Nt/P) * sum_p g_p * a_rx(aoa_p) * a_tx(aod_p)^H
//
// Steering vectors have unit norm; with E|g_p|^2 summing to P the channel
// satisfies E||H||_F^2 = Nr*Nt. The geometry (angles, LOS gain) is a pure
// function of the config seed, while NLOS gains come from the caller's rng.

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "chanest/common.hpp"

namespace chanest::sim {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct ChannelModelConfig {
  std::size_t n_rx = 64;
  std::size_t n_tx = 32;
  std::size_t n_paths = 8;
  bool los = true;
  // Share of the total path power carried by the LOS path.
  double los_power = 0.6;
  // Std-dev (rad) of NLOS angles around the LOS/cluster direction.
  double angle_spread = 0.3;
  // Extra rotation of the LOS arrival angle (mobility).
  double los_aoa_offset = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PathAngles {
  double aoa = 0.0;
  double aod = 0.0;
};

struct ChannelGeometry {
  std::size_t n_rx = 0;
  std::size_t n_tx = 0;
  std::vector<PathAngles> paths;  // LOS first when present
  bool los = false;
  Complex los_gain{0.0, 0.0};
  double nlos_variance = 1.0;  // E|g_p|^2 for each NLOS path
};

struct MobilityScenario {
  std::size_t n_frames = 10;
  std::size_t hold_frames = 3;
  double aoa_drift = 0.05;  // rad per frame once the receiver moves

  void validate() const;
};

/// Unit-norm ULA response: a[n] = exp(-j*pi*n*sin(angle)) / sqrt(N).
ComplexVector steering_vector(std::size_t n, double angle);

ChannelGeometry channel_geometry(const ChannelModelConfig& cfg);

/// Draws one gain per path (LOS gain is fixed by the geometry).
ComplexVector draw_path_gains(const ChannelGeometry& geometry, Rng& rng);

ComplexMatrix synthesize_channel(const ChannelGeometry& geometry, const ComplexVector& gains);

/// One channel realization of the configured geometry.
ComplexMatrix gen_channel(const ChannelModelConfig& cfg, Rng& rng);

/// First Nt rows of the L-point DFT matrix; X * X^H = L * I.
ComplexMatrix gen_pilots(std::size_t n_tx, std::size_t pilot_len);

struct Received {
  ComplexMatrix y;
  double noise_variance = 0.0;  // per complex entry
};

/// Y = H*X + N with sigma^2 = (||HX||_F^2 / (Nr*L)) / 10^(snr_db/10).
/// snr_db = +inf disables the noise.
Received transmit(const ComplexMatrix& h, const ComplexMatrix& x, double snr_db, Rng& rng);

/// Empirical (1/n) sum vec(H_i) vec(H_i)^H over fresh gain draws of the
/// configured geometry. Matches drawing n channels with gen_channel from the
/// same rng state.
ComplexMatrix channel_correlation(const ChannelModelConfig& cfg, std::size_t n_samples, Rng& rng);

/// Like channel_correlation, but every draw also gets a fresh geometry
/// (random config seed): the long-run correlation of the whole scenario.
ComplexMatrix scenario_correlation(const ChannelModelConfig& cfg, std::size_t n_samples, Rng& rng);

/// The channel config seen in a given (1-based) mobility frame.
ChannelModelConfig frame_config(const ChannelModelConfig& cfg, const MobilityScenario& scenario, std::size_t frame);

/// Channel of a mobility frame. Frames up to hold_frames repeat the base
/// realization; later frames rotate the LOS AoA and redraw the NLOS gains.
/// `rng` is taken by value: the result depends only on its state.
ComplexMatrix evolve_channel(const ChannelModelConfig& cfg, const MobilityScenario& scenario, std::size_t frame,
                             Rng rng);

/// Column-major stacking.
ComplexVector vec(const ComplexMatrix& m);

double frobenius_sq(const ComplexMatrix& m);

/// 64-bit FNV-1a over the dimensions and raw doubles of the matrices.
std::uint64_t content_hash(std::initializer_list<const ComplexMatrix*> matrices);

}  // namespace chanest::sim

#endif  // CHANEST_SIM_CHANNEL_HPP_
