#pragma once
/**
 * Channel estimation.
 *
 * ls_estimate: least squares over the training prefix, h_hat =
 * (bp^H bp)^{-1} bp^H y_p via Cholesky-backed normal equations.  A synthetic
 * rank-deficient regressor matrix is reported as failure (std::nullopt); a
 * valid unit-modulus training prefix always factors.
 *
 * lms_update: one decision-directed LMS step.  With the symbol regressor s
 * (newest symbol first) the prediction is sum_k s_k h_k, the a-priori error
 * e = y - prediction, and the update h += mu conj(s) e, which contracts the
 * a-posteriori error to (1 - mu ||s||^2) e.
 */

#include <optional>

#include "tpmlse/common.hpp"
#include "tpmlse/linalg.hpp"
#include "tpmlse/signal_model.hpp"

namespace tpmlse {

enum class EstimateSource { LS, PERFECT, LMS };

struct ChannelEstimate {
  cvec h;
  EstimateSource source = EstimateSource::LS;
};

/// LS solve reusing a prefactored training Gram (hot path for sweeps).
inline std::optional<ChannelEstimate> ls_solve(const CholeskyHerm& gram_chol, const CMatrix& bp,
                                               const cvec& y_p, MultCounter* mc = nullptr) {
  if (!gram_chol.ok) return std::nullopt;
  const cvec rhs = adj_vec(bp, y_p);
  count_mults(mc, static_cast<std::uint64_t>(bp.rows) * bp.cols);
  ChannelEstimate est;
  est.h = chol_solve(gram_chol, rhs, mc);
  est.source = EstimateSource::LS;
  return est;
}

/// Self-contained LS estimate from the training matrix and received prefix.
inline std::optional<ChannelEstimate> ls_estimate(const CMatrix& bp, const cvec& y_p,
                                                  MultCounter* mc = nullptr) {
  if (static_cast<int>(y_p.size()) != bp.rows) {
    throw std::invalid_argument("ls_estimate: prefix length must match bp rows");
  }
  const auto f = chol_factor(gram(bp), mc);
  if (!f.ok) return std::nullopt;
  return ls_solve(f, bp, y_p, mc);
}

/// LMS step size tied to the fading rate: sqrt(1 - alpha^2) / 2.
inline double lms_step_size(double alpha) { return std::sqrt(1.0 - alpha * alpha) / 2.0; }

/// One LMS step; returns the a-priori error e.
inline cplx lms_update(cvec& h, const cvec& regressor_newest_first, cplx y, double mu,
                       MultCounter* mc = nullptr) {
  const int p = static_cast<int>(h.size());
  if (static_cast<int>(regressor_newest_first.size()) != p) {
    throw std::invalid_argument("lms_update: regressor length must match tap count");
  }
  cplx pred(0.0, 0.0);
  for (int k = 0; k < p; ++k) pred += regressor_newest_first[k] * h[k];
  const cplx e = y - pred;
  for (int k = 0; k < p; ++k) h[k] += mu * std::conj(regressor_newest_first[k]) * e;
  count_mults(mc, static_cast<std::uint64_t>(2 * p));
  return e;
}

}  // namespace tpmlse
