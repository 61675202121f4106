// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_TESTS_ORACLES_LINALG_ORACLES_HPP_
#define CHANEST_TESTS_ORACLES_LINALG_ORACLES_HPP_

// Plain-loop complex linear algebra used to cross-check the Eigen-backed
// estimators. Nothing here shares code with src/.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

struct Dense {
  std::size_t rows = 0, cols = 0;
  std::vector<cd> v;  // row-major
  Dense() = default;
  Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c) {}
  cd& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  cd operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

template <class M>
Dense from(const M& m) {
  Dense d(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j) d(i, j) = m(static_cast<long>(i), static_cast<long>(j));
  return d;
}

inline Dense mul(const Dense& a, const Dense& b) {
  Dense c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline Dense adjoint(const Dense& a) {
  Dense t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = std::conj(a(i, j));
  return t;
}

inline Dense transpose(const Dense& a) {
  Dense t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Dense kron(const Dense& a, const Dense& b) {
  Dense k(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      for (std::size_t p = 0; p < b.rows; ++p)
        for (std::size_t q = 0; q < b.cols; ++q) k(i * b.rows + p, j * b.cols + q) = a(i, j) * b(p, q);
  return k;
}

inline Dense identity(std::size_t n) {
  Dense d(n, n);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = 1.0;
  return d;
}

/// Column-major stacking as a column vector.
inline Dense vec(const Dense& a) {
  Dense out(a.rows * a.cols, 1);
  for (std::size_t j = 0; j < a.cols; ++j)
    for (std::size_t i = 0; i < a.rows; ++i) out(j * a.rows + i, 0) = a(i, j);
  return out;
}

/// Solves A X = B by Gauss-Jordan elimination with partial pivoting.
inline Dense solve(Dense a, Dense b) {
  const std::size_t n = a.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) == 0.0) throw std::runtime_error("oracle: singular system");
    for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
    for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(col, j), b(piv, j));
    const cd d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) a(col, j) /= d;
    for (std::size_t j = 0; j < b.cols; ++j) b(col, j) /= d;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const cd f = a(r, col);
      if (f == cd(0.0)) continue;
      for (std::size_t j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < b.cols; ++j) b(r, j) -= f * b(col, j);
    }
  }
  return b;
}

/// LS through the normal equations: H^T solves (conj(X) X^T) H^T = conj(X) Y^T.
inline Dense ls_normal_equations(const Dense& y, const Dense& x) {
  Dense xc = transpose(adjoint(x));  // conj(X)
  Dense ht = solve(mul(xc, transpose(x)), mul(xc, transpose(y)));
  return transpose(ht);
}

/// The literal vectorized LMMSE: R A^H (A R A^H + s I)^-1 vec(Y), A = X^T kron I.
inline Dense lmmse_literal(const Dense& y, const Dense& x, const Dense& r, double sigma2) {
  const std::size_t nr = y.rows, nt = x.rows;
  const Dense a = kron(transpose(x), identity(nr));
  const Dense ah = adjoint(a);
  Dense m = mul(mul(a, r), ah);
  for (std::size_t i = 0; i < m.rows; ++i) m(i, i) += sigma2;
  const Dense h = mul(mul(r, ah), solve(m, vec(y)));
  Dense out(nr, nt);
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < nr; ++i) out(i, j) = h(j * nr + i, 0);
  return out;
}

template <class M>
double max_abs_diff(const Dense& a, const M& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      worst = std::max(worst, std::abs(a(i, j) - cd(b(static_cast<long>(i), static_cast<long>(j)))));
  return worst;
}

/// ULA response written out independently of the library.
inline std::vector<cd> ula(std::size_t n, double angle) {
  std::vector<cd> a(n);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double ph = -pi * static_cast<double>(k) * std::sin(angle);
    a[k] = cd(std::cos(ph), std::sin(ph)) / std::sqrt(static_cast<double>(n));
  }
  return a;
}

}  // namespace oracle

#endif  // CHANEST_TESTS_ORACLES_LINALG_ORACLES_HPP_
