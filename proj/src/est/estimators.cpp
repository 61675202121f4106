// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/est/estimators.hpp"

#include <cmath>
#include <string>

namespace chanest::est {

namespace {

void check_system(const ComplexMatrix& y, const ComplexMatrix& x) {
  if (y.cols() != x.cols()) {
    throw ShapeError("Y has " + std::to_string(y.cols()) + " columns but X has " + std::to_string(x.cols()));
  }
  if (y.size() == 0 || x.size() == 0) throw ShapeError("empty pilot system");
}

}  // namespace

ComplexMatrix ls_estimate(const ComplexMatrix& y, const ComplexMatrix& x) {
  check_system(y, x);
  const ComplexMatrix gram = x * x.adjoint();
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(eig.maxCoeff() > 0.0) || eig.minCoeff() <= 1e-12 * eig.maxCoeff()) {
    throw RankError("X X^H is singular: pilots must have full row rank (L >= N_t)");
  }
  Eigen::LDLT<ComplexMatrix> ldlt(gram);
  // Solve (X X^H) H^H = X Y^H, i.e. H = Y X^H (X X^H)^-1.
  return ldlt.solve(x * y.adjoint()).adjoint();
}

ComplexMatrix lmmse_estimate(const ComplexMatrix& y, const ComplexMatrix& x, const ComplexMatrix& r_h,
                             double sigma2) {
  check_system(y, x);
  const Eigen::Index nr = y.rows();
  const Eigen::Index nt = x.rows();
  const Eigen::Index n = nr * nt;
  if (r_h.rows() != n || r_h.cols() != n) {
    throw ShapeError("R_h must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ValueError("noise variance must be finite and >= 0");
  const double scale = std::max(1.0, r_h.cwiseAbs().maxCoeff());
  if ((r_h - r_h.adjoint()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ValueError("R_h is not Hermitian");
  }

  // Push-through form of R A^H (A R A^H + s I)^-1 y: the system is Nr*Nt
  // instead of Nr*L, and A^H A = conj(X X^H) kron I never needs forming.
  const ComplexMatrix gram = (x * x.adjoint()).conjugate();  // conj(X) X^T
  ComplexMatrix m = sigma2 * ComplexMatrix::Identity(n, n);
  for (Eigen::Index t = 0; t < nt; ++t) {
    for (Eigen::Index s = 0; s < nt; ++s) {
      const auto g = gram(t, s);
      if (g == sim::Complex(0.0, 0.0)) continue;
      m.middleRows(t * nr, nr).noalias() += g * r_h.middleRows(s * nr, nr);
    }
  }
  const ComplexMatrix rhs = y * x.adjoint();  // A^H vec(Y), reshaped
  const sim::ComplexVector z = m.partialPivLu().solve(rhs.reshaped());
  const sim::ComplexVector h = r_h * z;
  if (!h.allFinite()) throw RankError("LMMSE system is singular for the given R_h and noise variance");
  return h.reshaped(nr, nt);
}

ComplexMatrix mmse_oracle(const ComplexMatrix& y, const ComplexMatrix& x, const sim::ChannelModelConfig& cfg,
                          double sigma2, std::size_t n_cov_samples, Rng& rng) {
  if (static_cast<std::size_t>(y.rows()) != cfg.n_rx || static_cast<std::size_t>(x.rows()) != cfg.n_tx) {
    throw ShapeError("pilot system does not match the channel config");
  }
  return lmmse_estimate(y, x, sim::channel_correlation(cfg, n_cov_samples, rng), sigma2);
}

double nmse(const ComplexMatrix& h_est, const ComplexMatrix& h) {
  if (h_est.rows() != h.rows() || h_est.cols() != h.cols()) throw ShapeError("nmse: shape mismatch");
  const double denom = h.squaredNorm();
  if (!(denom > 0.0)) throw ValueError("nmse: reference channel is zero");
  return (h_est - h).squaredNorm() / denom;
}

double nmse_db(double nmse_linear) { return 10.0 * std::log10(nmse_linear); }

}  // namespace chanest::est
