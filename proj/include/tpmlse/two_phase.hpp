#pragma once
/**
 * Two-phase sequence search with a per-branch dense correction.
 *
 * Phase one is the standard forward add-compare-select on the accumulated
 * squared residual, extended with two per-lag survivor accumulators (the
 * residual-regressor cross terms eta and the regressor lag products rho).
 * Phase two sweeps the trellis backward keeping, per state, the suffix
 * counterparts (zeta, sigma) of the same sums plus the suffix residual
 * energy varphi.  At each backward step every outgoing branch combines
 * prefix, branch and suffix statistics into the cross vector r and the band
 * vector psi of the dense matrix D, and is scored as
 *
 *   Sigma = varphi(succ) + |c|^2 + phi(state) - r^H D^{-1} r,
 *
 * i.e. the exact whole-block corrected metric of the best composite
 * sequence through the branch.  The decoded sequence follows the stored
 * selections forward from the initial state.
 *
 * D is assembled from a constant part (training Gram plus a training-edge
 * band term) and the Hermitian banded spread of psi; when its factorization
 * fails the correction for that branch falls back to zero and the event is
 * counted, never fatal.
 */

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tpmlse/common.hpp"
#include "tpmlse/estimation.hpp"
#include "tpmlse/linalg.hpp"
#include "tpmlse/signal_model.hpp"
#include "tpmlse/trellis.hpp"
#include "tpmlse/viterbi.hpp"

namespace tpmlse {

struct TwoPhaseDiagnostics {
  std::uint64_t lambda_fallbacks = 0;
};

// Everything fixed by the frame format alone, shared across all trials of a
// configuration: the trellis, the training convolution matrix with its
// Gram factorization (least-squares reuse), and the constant part of D.
struct ReceiverContext {
  FrameFormat fmt;
  Trellis trellis;
  CMatrix bp;
  CMatrix gram;
  CholeskyHerm gram_chol;
  CMatrix d_const;
};

// Band correction accounting for the training samples that the regressor
// windows of the first data steps reach back into.  Entry (k, k') with
// k' >= k sums conj(training[s]) * training[s - (k'-k)] over the last k
// training positions, zero-extended outside the training block; the lower
// triangle is the Hermitian mirror.  Added to the training Gram this makes
// the banded assembly of D exact for every memory length.
inline CMatrix training_edge_matrix(const FrameFormat& fmt) {
  CMatrix h;
  h.rows = h.cols = fmt.P;
  h.a.assign(static_cast<size_t>(fmt.P) * fmt.P, cplx(0, 0));
  for (int k = 0; k < fmt.P; ++k) {
    for (int kp = k; kp < fmt.P; ++kp) {
      const int delta = kp - k;
      cplx acc(0, 0);
      for (int s = fmt.T - k; s < fmt.T; ++s) {
        const int j = s - delta;
        if (j >= 0 && j < fmt.T) acc += std::conj(fmt.training[s]) * fmt.training[j];
      }
      h.at(k, kp) = acc;
      if (kp != k) h.at(kp, k) = std::conj(acc);
    }
  }
  return h;
}

inline ReceiverContext make_receiver_context(const FrameFormat& fmt) {
  fmt.validate();
  ReceiverContext ctx;
  ctx.fmt = fmt;
  ctx.trellis = build_trellis(fmt);
  const cvec seq = assemble_sequence(fmt, std::vector<int>(fmt.data_len(), 0));
  ctx.bp = build_matrices(fmt, seq).bp;
  ctx.gram = gram(ctx.bp);
  ctx.gram_chol = chol_factor(ctx.gram);
  if (!ctx.gram_chol.ok) throw std::invalid_argument("training Gram is singular");
  const CMatrix edge = training_edge_matrix(fmt);
  ctx.d_const = ctx.gram;
  for (size_t i = 0; i < ctx.d_const.a.size(); ++i) ctx.d_const.a[i] += edge.a[i];
  return ctx;
}

// Dense per-(time, state) tables filled by the backward sweep: varphi is
// the suffix residual energy along the selected continuation, zeta/sigma
// the matching suffix accumulators, xi the selected out-branch (-1 at the
// terminal virtual step) and sel the winning Sigma value.
struct BackwardTables {
  int S = 0;
  int n_steps = 0;
  int P = 0;
  std::vector<double> varphi;
  std::vector<double> sel;
  std::vector<int> xi;
  cvec zeta;
  cvec sigma;

  void reset(const Trellis& tr) {
    S = tr.S;
    n_steps = tr.n_steps;
    P = tr.fmt.P;
    const size_t nodes = static_cast<size_t>(n_steps + 1) * S;
    varphi.assign(nodes, std::numeric_limits<double>::infinity());
    sel.assign(nodes, std::numeric_limits<double>::infinity());
    xi.assign(nodes, -2);
    zeta.assign(nodes * P, cplx(0, 0));
    sigma.assign(nodes * P, cplx(0, 0));
  }

  size_t node(int t, int s) const { return static_cast<size_t>(t) * S + s; }
  double& varphi_at(int t, int s) { return varphi[node(t, s)]; }
  double varphi_at(int t, int s) const { return varphi[node(t, s)]; }
  double& sel_at(int t, int s) { return sel[node(t, s)]; }
  double sel_at(int t, int s) const { return sel[node(t, s)]; }
  int& xi_at(int t, int s) { return xi[node(t, s)]; }
  int xi_at(int t, int s) const { return xi[node(t, s)]; }
  cplx& zeta_at(int t, int s, int l) { return zeta[node(t, s) * P + l]; }
  cplx zeta_at(int t, int s, int l) const { return zeta[node(t, s) * P + l]; }
  cplx& sigma_at(int t, int s, int l) { return sigma[node(t, s) * P + l]; }
  cplx sigma_at(int t, int s, int l) const { return sigma[node(t, s) * P + l]; }
};

// Reusable cross-trial scratch: the forward/backward tables plus the
// per-branch assembly buffers, so the hot path allocates nothing.
struct TwoPhaseWorkspace {
  ForwardTables fwd;
  BackwardTables bwd;
  CMatrix d;
  cvec r;
  cvec psi;
  cvec solve_scratch;
  CholeskyHerm chol;
};

namespace detail {

// D = d_const + banded Hermitian spread of psi (psi[delta] on the delta-th
// superdiagonal, conjugate mirrored below).
inline void assemble_dense(const CMatrix& d_const, const cvec& psi, CMatrix& d) {
  d = d_const;
  const int p = d.rows;
  for (int k = 0; k < p; ++k) {
    for (int kp = k; kp < p; ++kp) {
      const cplx v = psi[kp - k];
      d.at(k, kp) += v;
      if (kp != k) d.at(kp, k) += std::conj(v);
    }
  }
}

// r^H D^{-1} r with the documented fallback: a failed factorization yields
// zero correction and bumps the counter.
inline double lambda_value(const CMatrix& d, const cvec& r, CholeskyHerm& chol, cvec& scratch,
                           MultCounter* mc, std::uint64_t* fallbacks) {
  chol_factor_into(chol, d, mc);
  if (!chol.ok) {
    if (fallbacks != nullptr) ++*fallbacks;
    return 0.0;
  }
  return chol_quadform_into(chol, r, scratch, mc);
}

}  // namespace detail

// Backward selection sweep.  Requires forward tables computed with
// accumulators for the same trellis, estimate and received vector.
inline void backward_pass(const ReceiverContext& ctx, const cvec& y, const cvec& h_hat,
                          TwoPhaseWorkspace& ws, TwoPhaseDiagnostics* diag = nullptr,
                          MultCounter* mc = nullptr) {
  const Trellis& tr = ctx.trellis;
  const int p = ctx.fmt.P;
  if (!ws.fwd.has_acc) throw std::logic_error("backward_pass: forward accumulators missing");
  std::uint64_t* fb = diag != nullptr ? &diag->lambda_fallbacks : nullptr;
  ws.bwd.reset(tr);
  ws.r.resize(p);
  ws.psi.resize(p);

  // Terminal virtual step: no branch term, suffix statistics empty.
  {
    const int t = tr.n_steps;
    const int i = tr.final_state;
    for (int l = 0; l < p; ++l) {
      ws.r[l] = ws.fwd.eta_at(t, i, l);
      ws.psi[l] = ws.fwd.rho_at(t, i, l);
    }
    detail::assemble_dense(ctx.d_const, ws.psi, ws.d);
    const double lambda =
        detail::lambda_value(ws.d, ws.r, ws.chol, ws.solve_scratch, mc, fb);
    ws.bwd.sel_at(t, i) = ws.fwd.phi_at(t, i) - lambda;
    ws.bwd.varphi_at(t, i) = 0.0;
    ws.bwd.xi_at(t, i) = -1;
  }

  for (int t = tr.n_steps - 1; t >= 0; --t) {
    const TrellisStage& stage = tr.stages[t];  // consumes received sample T + t
    const cplx y_sample = y[ctx.fmt.T + t];
    for (const int i : stage.reach_prev) {
      double best = std::numeric_limits<double>::infinity();
      int best_b = -1;
      cplx best_c(0, 0);
      for (int idx = stage.out_begin[i]; idx < stage.out_begin[i + 1]; ++idx) {
        const int b = stage.out_ids[idx];
        const TrellisBranch& br = stage.branches[b];
        const cplx* u = tr.branch_u(t, b);
        const cplx* rp = tr.branch_rho(t, b);
        const cplx c = detail::branch_residual(u, h_hat, y_sample, p, mc);
        for (int l = 0; l < p; ++l) {
          ws.r[l] = ws.fwd.eta_at(t, i, l) + c * std::conj(u[l]) + ws.bwd.zeta_at(t + 1, br.to, l);
          ws.psi[l] = ws.fwd.rho_at(t, i, l) + rp[l] + ws.bwd.sigma_at(t + 1, br.to, l);
        }
        count_mults(mc, p);
        detail::assemble_dense(ctx.d_const, ws.psi, ws.d);
        const double lambda =
            detail::lambda_value(ws.d, ws.r, ws.chol, ws.solve_scratch, mc, fb);
        const double sigma_metric = ws.bwd.varphi_at(t + 1, br.to) + std::norm(c) +
                                    ws.fwd.phi_at(t, i) - lambda;
        count_mults(mc, 1);
        if (sigma_metric < best) {  // strict: first (smallest successor) keeps ties
          best = sigma_metric;
          best_b = b;
          best_c = c;
        }
      }
      const TrellisBranch& win = stage.branches[best_b];
      const cplx* u = tr.branch_u(t, best_b);
      const cplx* rp = tr.branch_rho(t, best_b);
      ws.bwd.sel_at(t, i) = best;
      ws.bwd.xi_at(t, i) = best_b;
      ws.bwd.varphi_at(t, i) = ws.bwd.varphi_at(t + 1, win.to) + std::norm(best_c);
      for (int l = 0; l < p; ++l) {
        ws.bwd.zeta_at(t, i, l) =
            ws.bwd.zeta_at(t + 1, win.to, l) + best_c * std::conj(u[l]);
        ws.bwd.sigma_at(t, i, l) = ws.bwd.sigma_at(t + 1, win.to, l) + rp[l];
      }
      count_mults(mc, p);
    }
  }
}

// Full two-phase decode: forward sweep with accumulators, backward
// selection, then the forward walk along the stored selections.
inline std::vector<int> two_phase_decode(const ReceiverContext& ctx, const cvec& y,
                                         const cvec& h_hat, TwoPhaseWorkspace& ws,
                                         TwoPhaseDiagnostics* diag = nullptr,
                                         MultCounter* mc = nullptr) {
  forward_pass(ctx.trellis, y, h_hat, ws.fwd, mc, true);
  backward_pass(ctx, y, h_hat, ws, diag, mc);

  const Trellis& tr = ctx.trellis;
  std::vector<int> data(ctx.fmt.data_len(), 0);
  int s = tr.initial_state;
  for (int t = 0; t < tr.n_steps; ++t) {
    const int b = ws.bwd.xi_at(t, s);
    if (b < 0) throw std::logic_error("two_phase_decode: selection missing");
    const TrellisBranch& br = tr.stages[t].branches[b];
    if (tr.stages[t].is_data) data[t] = br.sym;
    s = br.to;
  }
  if (s != tr.final_state) throw std::logic_error("two_phase_decode: path did not flush");
  return data;
}

// Per-time report of the metric pieces along one fixed sequence.
struct SinglePathReport {
  std::vector<double> sigma;    // corrected metric assembled at each time
  std::vector<double> lambda;   // quadratic-form value at each time
  std::vector<cvec> r;          // cross vector at each time
  std::vector<cvec> psi;        // band vector at each time
  std::uint64_t lambda_fallbacks = 0;
};

// Evaluate the two-phase bookkeeping constrained to one known sequence:
// prefix and suffix accumulators are propagated along the single path with
// the same helpers the production sweep uses, and the metric pieces are
// assembled at every time.  On a correct implementation r, the dense
// matrix, lambda and sigma are time-invariant and reproduce the
// whole-block oracle.
inline SinglePathReport single_path_metrics(const ReceiverContext& ctx, const cvec& y,
                                            const cvec& h_hat, const std::vector<int>& data) {
  const FrameFormat& fmt = ctx.fmt;
  const int p = fmt.P;
  const int n_steps = fmt.L() - fmt.T;
  const cvec seq = assemble_sequence(fmt, data);

  // Regressor window and residual of each step (1-based step index).
  std::vector<cvec> u(n_steps + 1, cvec(p));
  cvec c(n_steps + 1, cplx(0, 0));
  for (int t = 1; t <= n_steps; ++t) {
    const int pos = fmt.T + t - 1;
    for (int k = 0; k < p; ++k) u[t][k] = padded_symbol(seq, pos - k);
    c[t] = detail::branch_residual(u[t].data(), h_hat, y[pos], p, nullptr);
  }

  // Prefix sums (forward role) and suffix sums (backward role).
  std::vector<double> phi(n_steps + 1, 0.0), varphi(n_steps + 1, 0.0);
  std::vector<cvec> eta(n_steps + 1, cvec(p, cplx(0, 0)));
  std::vector<cvec> rho(n_steps + 1, cvec(p, cplx(0, 0)));
  std::vector<cvec> zeta(n_steps + 1, cvec(p, cplx(0, 0)));
  std::vector<cvec> sig(n_steps + 1, cvec(p, cplx(0, 0)));
  for (int t = 1; t <= n_steps; ++t) {
    phi[t] = phi[t - 1] + std::norm(c[t]);
    for (int l = 0; l < p; ++l) {
      eta[t][l] = eta[t - 1][l] + c[t] * std::conj(u[t][l]);
      rho[t][l] = rho[t - 1][l] + std::conj(u[t][0]) * u[t][l];
    }
  }
  for (int t = n_steps - 1; t >= 0; --t) {
    varphi[t] = varphi[t + 1] + std::norm(c[t + 1]);
    for (int l = 0; l < p; ++l) {
      zeta[t][l] = zeta[t + 1][l] + c[t + 1] * std::conj(u[t + 1][l]);
      sig[t][l] = sig[t + 1][l] + std::conj(u[t + 1][0]) * u[t + 1][l];
    }
  }

  SinglePathReport rep;
  rep.sigma.resize(n_steps + 1);
  rep.lambda.resize(n_steps + 1);
  rep.r.resize(n_steps + 1, cvec(p));
  rep.psi.resize(n_steps + 1, cvec(p));
  CMatrix d;
  CholeskyHerm chol;
  cvec scratch;
  for (int t = 0; t <= n_steps; ++t) {
    for (int l = 0; l < p; ++l) {
      rep.r[t][l] = eta[t][l] + zeta[t][l];
      rep.psi[t][l] = rho[t][l] + sig[t][l];
    }
    detail::assemble_dense(ctx.d_const, rep.psi[t], d);
    rep.lambda[t] =
        detail::lambda_value(d, rep.r[t], chol, scratch, nullptr, &rep.lambda_fallbacks);
    rep.sigma[t] = phi[t] + varphi[t] - rep.lambda[t];
  }
  return rep;
}

}  // namespace tpmlse
