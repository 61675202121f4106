// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_EST_ESTIMATORS_HPP_
#define CHANEST_EST_ESTIMATORS_HPP_

#include <cstddef>

#include "chanest/common.hpp"
#include "chanest/sim/channel.hpp"

namespace chanest::est {

using sim::ComplexMatrix;

/// H = Y X^H (X X^H)^-1. Throws RankError when X X^H is singular.
ComplexMatrix ls_estimate(const ComplexMatrix& y, const ComplexMatrix& x);

/// Linear MMSE estimate for vec(Y) = (X^T kron I) vec(H) + n with prior
/// correlation R_h (size Nr*Nt) and per-entry noise variance sigma2.
/// Throws ValueError when R_h is not Hermitian to within 1e-8.
ComplexMatrix lmmse_estimate(const ComplexMatrix& y, const ComplexMatrix& x, const ComplexMatrix& r_h,
                             double sigma2);

/// lmmse_estimate with R_h drawn from the true channel geometry.
ComplexMatrix mmse_oracle(const ComplexMatrix& y, const ComplexMatrix& x, const sim::ChannelModelConfig& cfg,
                          double sigma2, std::size_t n_cov_samples, Rng& rng);

/// ||H_e - H||_F^2 / ||H||_F^2. Throws ValueError for a zero H.
double nmse(const ComplexMatrix& h_est, const ComplexMatrix& h);

double nmse_db(double nmse_linear);

}  // namespace chanest::est

#endif  // CHANEST_EST_ESTIMATORS_HPP_
