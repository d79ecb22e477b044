#pragma once
/**
 * Small complex Hermitian positive-definite factorization.
 *
 * The equalizer needs P x P solves (P is small) in two places: the training
 * normal equations and the per-branch quadratic form r^H D^{-1} r.  Both go
 * through this Cholesky; no explicit inverse is ever formed.  Failure to
 * factor (non-positive pivot) is reported through `ok` so callers can take
 * their documented fallback.
 */

#include <cmath>
#include <stdexcept>

#include "tpmlse/common.hpp"
#include "tpmlse/signal_model.hpp"

namespace tpmlse {

struct CholeskyHerm {
  int n = 0;
  cvec lower;  ///< row-major lower-triangular factor, zero above the diagonal
  bool ok = false;

  cplx& at(int r, int c) { return lower[static_cast<size_t>(r) * n + c]; }
  const cplx& at(int r, int c) const { return lower[static_cast<size_t>(r) * n + c]; }
};

/// Factor a Hermitian positive-definite matrix (lower triangle of `a` is
/// read) as L L^H, reusing the storage of `f`.  `f.ok` is false when a pivot
/// drops below a scale-relative floor, i.e. the matrix is singular or
/// indefinite to working precision.
inline void chol_factor_into(CholeskyHerm& f, const CMatrix& a, MultCounter* mc = nullptr) {
  if (a.rows != a.cols) throw std::invalid_argument("chol_factor: matrix must be square");
  const int n = a.rows;
  f.n = n;
  f.ok = false;
  f.lower.assign(static_cast<size_t>(n) * n, cplx(0.0, 0.0));

  double scale = 0.0;
  for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a.at(j, j).real()));
  const double floor = std::max(scale, 1.0) * 1e-13;

  for (int j = 0; j < n; ++j) {
    double d = a.at(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(f.at(j, k));
    count_mults(mc, j);
    if (d <= floor) return;  // ok stays false
    const double ljj = std::sqrt(d);
    f.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cplx s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= f.at(i, k) * std::conj(f.at(j, k));
      f.at(i, j) = s / ljj;
      count_mults(mc, j + 1);
    }
  }
  f.ok = true;
}

inline CholeskyHerm chol_factor(const CMatrix& a, MultCounter* mc = nullptr) {
  CholeskyHerm f;
  chol_factor_into(f, a, mc);
  return f;
}

/// Solve L z = b (forward substitution).
inline cvec chol_solve_lower(const CholeskyHerm& f, const cvec& b, MultCounter* mc = nullptr) {
  if (!f.ok) throw std::logic_error("chol_solve_lower: factorization not valid");
  if (static_cast<int>(b.size()) != f.n) throw std::invalid_argument("chol_solve_lower: size");
  cvec z(b);
  for (int i = 0; i < f.n; ++i) {
    cplx s = z[i];
    for (int k = 0; k < i; ++k) s -= f.at(i, k) * z[k];
    z[i] = s / f.at(i, i).real();
    count_mults(mc, i + 1);
  }
  return z;
}

/// Solve A x = b with A = L L^H.
inline cvec chol_solve(const CholeskyHerm& f, const cvec& b, MultCounter* mc = nullptr) {
  cvec x = chol_solve_lower(f, b, mc);
  for (int i = f.n - 1; i >= 0; --i) {
    cplx s = x[i];
    for (int k = i + 1; k < f.n; ++k) s -= std::conj(f.at(k, i)) * x[k];
    x[i] = s / f.at(i, i).real();
    count_mults(mc, f.n - i);
  }
  return x;
}

/// r^H A^{-1} r = ||L^{-1} r||^2; real and nonnegative for PD A.
/// The in-place form substitutes into caller-provided scratch `z` so the
/// per-branch path allocates nothing.
inline double chol_quadform_into(const CholeskyHerm& f, const cvec& r, cvec& z,
                                 MultCounter* mc = nullptr) {
  if (!f.ok) throw std::logic_error("chol_quadform: factorization not valid");
  if (static_cast<int>(r.size()) != f.n) throw std::invalid_argument("chol_quadform: size");
  z.resize(r.size());
  double q = 0.0;
  for (int i = 0; i < f.n; ++i) {
    cplx s = r[i];
    for (int k = 0; k < i; ++k) s -= f.at(i, k) * z[k];
    z[i] = s / f.at(i, i).real();
    count_mults(mc, i + 1);
    q += std::norm(z[i]);
  }
  count_mults(mc, f.n);
  return q;
}

inline double chol_quadform(const CholeskyHerm& f, const cvec& r, MultCounter* mc = nullptr) {
  cvec z;
  return chol_quadform_into(f, r, z, mc);
}

/// log det A = 2 sum log L_jj.
inline double chol_logdet(const CholeskyHerm& f) {
  if (!f.ok) throw std::logic_error("chol_logdet: factorization not valid");
  double acc = 0.0;
  for (int j = 0; j < f.n; ++j) acc += std::log(f.at(j, j).real());
  return 2.0 * acc;
}

}  // namespace tpmlse
