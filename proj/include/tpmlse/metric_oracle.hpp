#pragma once
/**
 * Dense decision metrics and the exhaustive reference decoder.
 *
 * For a candidate data matrix bd, residual e = y_d - bd h_hat, training Gram
 * g and D = bd^H bd + g:
 *
 *   euclidean   = ||e||^2
 *   correction  = e^H bd D^{-1} bd^H e          (>= 0)
 *   near_ml     = euclidean - correction        (>= 0: I - Q_B is PD)
 *   logdet_term = noise_var * log det(I + g^{-1} bd^H bd)
 *   full_ml     = near_ml + logdet_term
 *
 * evaluate_metrics is the dense ground truth the recursive equalizer is
 * validated against, so it deliberately goes through Eigen rather than the
 * library's own small solver.  exhaustive_decode enumerates every data word
 * (guarded) and is both the reference receiver and the correctness oracle
 * for the trellis searches.
 */

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tpmlse/common.hpp"
#include "tpmlse/linalg.hpp"
#include "tpmlse/signal_model.hpp"

namespace tpmlse {

struct MetricBreakdown {
  double euclidean = 0.0;
  double correction = 0.0;
  double near_ml = 0.0;
  double logdet_term = 0.0;
  double full_ml = 0.0;
};

enum class DecodeCriterion { EUCLIDEAN, NEAR_ML, FULL_ML };

/// Dense evaluation of all metric pieces for one candidate bd.
inline MetricBreakdown evaluate_metrics(const CMatrix& bd, const CMatrix& bp_gram,
                                        const cvec& y_d, const cvec& h_hat, double noise_var) {
  if (bd.rows != static_cast<int>(y_d.size())) {
    throw std::invalid_argument("evaluate_metrics: y_d length must match bd rows");
  }
  if (bd.cols != static_cast<int>(h_hat.size()) || bp_gram.rows != bd.cols ||
      bp_gram.cols != bd.cols) {
    throw std::invalid_argument("evaluate_metrics: tap-count mismatch");
  }
  const int p = bd.cols;

  Eigen::MatrixXcd bde(bd.rows, p);
  for (int r = 0; r < bd.rows; ++r) {
    for (int c = 0; c < p; ++c) bde(r, c) = bd.at(r, c);
  }
  Eigen::MatrixXcd ge(p, p);
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) ge(r, c) = bp_gram.at(r, c);
  }
  Eigen::VectorXcd ye(bd.rows), he(p);
  for (int r = 0; r < bd.rows; ++r) ye(r) = y_d[r];
  for (int c = 0; c < p; ++c) he(c) = h_hat[c];

  const Eigen::VectorXcd e = ye - bde * he;
  const Eigen::MatrixXcd d = bde.adjoint() * bde + ge;
  const Eigen::VectorXcd w = bde.adjoint() * e;

  const Eigen::LLT<Eigen::MatrixXcd> d_llt(d);
  const Eigen::LLT<Eigen::MatrixXcd> g_llt(ge);
  if (d_llt.info() != Eigen::Success || g_llt.info() != Eigen::Success) {
    throw std::runtime_error("evaluate_metrics: Gram matrices are not positive definite");
  }

  MetricBreakdown mb;
  mb.euclidean = e.squaredNorm();
  mb.correction = (w.adjoint() * d_llt.solve(w))(0, 0).real();
  mb.near_ml = mb.euclidean - mb.correction;
  double logdet_d = 0.0, logdet_g = 0.0;
  const auto ld = d_llt.matrixL().toDenseMatrix();
  const auto lg = g_llt.matrixL().toDenseMatrix();
  for (int i = 0; i < p; ++i) {
    logdet_d += std::log(ld(i, i).real());
    logdet_g += std::log(lg(i, i).real());
  }
  mb.logdet_term = noise_var * 2.0 * (logdet_d - logdet_g);
  mb.full_ml = mb.near_ml + mb.logdet_term;
  return mb;
}

struct ExhaustiveResult {
  std::vector<int> data;      ///< decoded symbol indices, N-T entries
  MetricBreakdown best;       ///< metric pieces of the winning word
  std::uint64_t candidates = 0;
};

/// Brute-force minimization of the chosen criterion over every data word.
/// Enumeration is lexicographic (first data symbol in the most significant
/// digits) and strictly-smaller comparison keeps the first minimizer, so
/// ties resolve to the lexicographically smallest word.  Guarded to
/// M (N-T) <= 24 search bits.
inline ExhaustiveResult exhaustive_decode(const FrameFormat& fmt, const cvec& y,
                                          const cvec& h_hat, double noise_var,
                                          DecodeCriterion crit, MultCounter* mc = nullptr) {
  fmt.validate();
  const int bits = fmt.M * fmt.data_len();
  if (bits > 24) {
    throw std::invalid_argument("exhaustive_decode: search space exceeds 2^24 words");
  }
  if (static_cast<int>(y.size()) != fmt.L()) {
    throw std::invalid_argument("exhaustive_decode: received length must be L");
  }
  const int p = fmt.P;
  const int rows = fmt.L() - fmt.T;
  const int q = psk_order(fmt.M);
  const int n_data = fmt.data_len();
  const std::uint64_t n_cand = 1ull << bits;

  // Training Gram and its log-det are candidate-independent.
  cvec seq = assemble_sequence(fmt, std::vector<int>(n_data, 0));
  const CMatrix bp = build_matrices(fmt, seq).bp;
  const CMatrix g = gram(bp);
  const CholeskyHerm g_chol = chol_factor(g);
  if (!g_chol.ok) throw std::runtime_error("exhaustive_decode: training Gram not PD");
  const double logdet_g = chol_logdet(g_chol);

  ExhaustiveResult out;
  out.candidates = n_cand;
  double best_value = std::numeric_limits<double>::infinity();

  CMatrix dmat(p, p);
  cvec e(rows), w(p);
  std::vector<int> data(n_data);

  for (std::uint64_t cand = 0; cand < n_cand; ++cand) {
    for (int i = 0; i < n_data; ++i) {
      const int shift = fmt.M * (n_data - 1 - i);
      data[i] = static_cast<int>((cand >> shift) & static_cast<std::uint64_t>(q - 1));
      seq[fmt.T + i] = psk_point(data[i], fmt.M);
    }

    // Residual over the data rows.
    double euclid = 0.0;
    for (int r = 0; r < rows; ++r) {
      cplx acc(0.0, 0.0);
      for (int k = 0; k < p; ++k) acc += h_hat[k] * padded_symbol(seq, fmt.T + r - k);
      e[r] = y[fmt.T + r] - acc;
      euclid += std::norm(e[r]);
    }
    count_mults(mc, static_cast<std::uint64_t>(rows) * (p + 1));

    MetricBreakdown mb;
    mb.euclidean = euclid;
    double value = euclid;

    if (crit != DecodeCriterion::EUCLIDEAN) {
      // w = bd^H e and D = bd^H bd + g, assembled row by row.
      for (int k = 0; k < p; ++k) w[k] = cplx(0.0, 0.0);
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) dmat.at(i, j) = g.at(i, j);
      }
      for (int r = 0; r < rows; ++r) {
        for (int k = 0; k < p; ++k) {
          const cplx b = padded_symbol(seq, fmt.T + r - k);
          if (b.real() == 0.0 && b.imag() == 0.0) continue;
          w[k] += std::conj(b) * e[r];
          for (int k2 = k; k2 < p; ++k2) {
            dmat.at(k, k2) += std::conj(b) * padded_symbol(seq, fmt.T + r - k2);
          }
        }
      }
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < i; ++j) dmat.at(i, j) = std::conj(dmat.at(j, i));
      }
      count_mults(mc, static_cast<std::uint64_t>(rows) * p);

      const CholeskyHerm d_chol = chol_factor(dmat, mc);
      if (!d_chol.ok) throw std::runtime_error("exhaustive_decode: candidate D not PD");
      mb.correction = chol_quadform(d_chol, w, mc);
      mb.near_ml = mb.euclidean - mb.correction;
      mb.logdet_term = noise_var * (chol_logdet(d_chol) - logdet_g);
      mb.full_ml = mb.near_ml + mb.logdet_term;
      value = crit == DecodeCriterion::NEAR_ML ? mb.near_ml : mb.full_ml;
    }

    if (value < best_value) {
      best_value = value;
      out.best = mb;
      out.data = data;
    }
  }

  if (crit == DecodeCriterion::EUCLIDEAN) {
    // Fill in the remaining pieces for the winning word.
    for (int i = 0; i < n_data; ++i) seq[fmt.T + i] = psk_point(out.data[i], fmt.M);
    const CMatrix bd = build_matrices(fmt, seq).bd;
    const cvec y_d(y.begin() + fmt.T, y.end());
    out.best = evaluate_metrics(bd, g, y_d, h_hat, noise_var);
  }
  return out;
}

}  // namespace tpmlse
