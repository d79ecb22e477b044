#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tpmlse/common.hpp"
#include "tpmlse/estimation.hpp"
#include "tpmlse/trellis.hpp"

namespace tpmlse {

// Dense per-(time, state) tables filled by the forward sweep.  phi is the
// accumulated squared residual of the survivor into each state; surv is the
// index of the winning in-branch at that stage (-1 if unreachable).  When
// accumulators are enabled, eta and rho carry the per-lag survivor sums
// needed by the backward sweep:
//   eta[l] += c * conj(u[l])          (residual-regressor cross terms)
//   rho[l] += conj(u[0]) * u[l]       (regressor lag products)
// both updated along the winning predecessor only.
struct ForwardTables {
  int S = 0;
  int n_steps = 0;
  int P = 0;
  bool has_acc = false;
  std::vector<double> phi;
  std::vector<int> surv;
  cvec eta;
  cvec rho;

  void reset(const Trellis& tr, bool with_acc) {
    S = tr.S;
    n_steps = tr.n_steps;
    P = tr.fmt.P;
    has_acc = with_acc;
    const size_t nodes = static_cast<size_t>(n_steps + 1) * S;
    phi.assign(nodes, std::numeric_limits<double>::infinity());
    surv.assign(nodes, -1);
    if (with_acc) {
      eta.assign(nodes * P, cplx(0, 0));
      rho.assign(nodes * P, cplx(0, 0));
    } else {
      eta.clear();
      rho.clear();
    }
  }

  size_t node(int t, int s) const { return static_cast<size_t>(t) * S + s; }
  double& phi_at(int t, int s) { return phi[node(t, s)]; }
  double phi_at(int t, int s) const { return phi[node(t, s)]; }
  int& surv_at(int t, int s) { return surv[node(t, s)]; }
  int surv_at(int t, int s) const { return surv[node(t, s)]; }
  cplx& eta_at(int t, int s, int l) { return eta[node(t, s) * P + l]; }
  cplx eta_at(int t, int s, int l) const { return eta[node(t, s) * P + l]; }
  cplx& rho_at(int t, int s, int l) { return rho[node(t, s) * P + l]; }
  cplx rho_at(int t, int s, int l) const { return rho[node(t, s) * P + l]; }
};

namespace detail {

// Branch residual c = y_sample - sum_k h[k] * u[k].
inline cplx branch_residual(const cplx* u, const cvec& h, cplx y_sample, int p,
                            MultCounter* mc) {
  cplx acc(0, 0);
  for (int k = 0; k < p; ++k) acc += h[k] * u[k];
  count_mults(mc, p);
  return y_sample - acc;
}

// Shared add-compare-select sweep.  `taps_of_step(t)` supplies the tap
// vector used at step t (1-based); `post_step(t)` runs after the step's
// states are settled (used by the decision-directed tracker).
template <class TapsFn, class PostFn>
void forward_pass_impl(const Trellis& tr, const cvec& y, TapsFn&& taps_of_step,
                       PostFn&& post_step, ForwardTables& ft, MultCounter* mc,
                       bool with_acc) {
  if (static_cast<int>(y.size()) != tr.fmt.L()) {
    throw std::invalid_argument("received vector length mismatch");
  }
  const int p = tr.fmt.P;
  ft.reset(tr, with_acc);
  ft.phi_at(0, tr.initial_state) = 0.0;

  for (int t = 1; t <= tr.n_steps; ++t) {
    const TrellisStage& stage = tr.stages[t - 1];
    const cplx y_sample = y[tr.fmt.T + t - 1];
    const cvec& h = taps_of_step(t);
    for (const int to : stage.reach_cur) {
      double best = std::numeric_limits<double>::infinity();
      int best_b = -1;
      cplx best_c(0, 0);
      for (int b = stage.in_begin[to]; b < stage.in_begin[to + 1]; ++b) {
        const TrellisBranch& br = stage.branches[b];
        const cplx c = branch_residual(tr.branch_u(t - 1, b), h, y_sample, p, mc);
        count_mults(mc, 1);
        const double cand = ft.phi_at(t - 1, br.from) + std::norm(c);
        if (cand < best) {  // strict: first (smallest predecessor) keeps ties
          best = cand;
          best_b = b;
          best_c = c;
        }
      }
      ft.phi_at(t, to) = best;
      ft.surv_at(t, to) = best_b;
      if (with_acc) {
        const int from = stage.branches[best_b].from;
        const cplx* u = tr.branch_u(t - 1, best_b);
        const cplx* rp = tr.branch_rho(t - 1, best_b);
        for (int l = 0; l < p; ++l) {
          ft.eta_at(t, to, l) = ft.eta_at(t - 1, from, l) + best_c * std::conj(u[l]);
          ft.rho_at(t, to, l) = ft.rho_at(t - 1, from, l) + rp[l];
        }
        count_mults(mc, p);
      }
    }
    post_step(t);
  }
}

}  // namespace detail

// State with the smallest survivor metric at time t (deterministic: the
// reach list is ascending and the comparison strict).
inline int global_best_state(const Trellis& tr, const ForwardTables& ft, int t) {
  if (t == 0) return tr.initial_state;
  const std::vector<int>& reach = tr.stages[t - 1].reach_cur;
  int best_s = reach.front();
  for (const int s : reach) {
    if (ft.phi_at(t, s) < ft.phi_at(t, best_s)) best_s = s;
  }
  return best_s;
}

// Forward sweep with a fixed tap estimate (the conventional receiver and
// the first phase of the two-phase receiver).
inline void forward_pass(const Trellis& tr, const cvec& y, const cvec& h, ForwardTables& ft,
                         MultCounter* mc = nullptr, bool with_acc = false) {
  if (static_cast<int>(h.size()) != tr.fmt.P) {
    throw std::invalid_argument("tap vector length mismatch");
  }
  detail::forward_pass_impl(tr, y, [&](int) -> const cvec& { return h; },
                            [](int) {}, ft, mc, with_acc);
}

// Forward sweep against a per-sample tap trajectory (genie receiver on a
// time-varying channel).  trajectory[s] holds the taps in effect for
// received sample s, 0 <= s < L.
inline void forward_pass_time_varying(const Trellis& tr, const cvec& y,
                                      const std::vector<cvec>& trajectory, ForwardTables& ft,
                                      MultCounter* mc = nullptr) {
  if (static_cast<int>(trajectory.size()) != tr.fmt.L()) {
    throw std::invalid_argument("tap trajectory length mismatch");
  }
  detail::forward_pass_impl(tr, y,
                            [&](int t) -> const cvec& { return trajectory[tr.fmt.T + t - 1]; },
                            [](int) {}, ft, mc, false);
}

// Forward sweep with decision-directed LMS tracking: after each step the
// taps are updated on the regressor of the winning branch into the
// currently best state, then used as-is for the next step.
inline void forward_pass_lms(const Trellis& tr, const cvec& y, const cvec& h_init, double mu,
                             ForwardTables& ft, MultCounter* mc = nullptr) {
  if (static_cast<int>(h_init.size()) != tr.fmt.P) {
    throw std::invalid_argument("tap vector length mismatch");
  }
  cvec h = h_init;
  cvec regressor(tr.fmt.P);
  const auto post = [&](int t) {
    const int s = global_best_state(tr, ft, t);
    const int b = ft.surv_at(t, s);
    const cplx* u = tr.branch_u(t - 1, b);
    for (int k = 0; k < tr.fmt.P; ++k) regressor[k] = u[k];
    lms_update(h, regressor, y[tr.fmt.T + t - 1], mu, mc);
  };
  detail::forward_pass_impl(tr, y, [&](int) -> const cvec& { return h; }, post, ft, mc, false);
}

// Survivor traceback from the flush state; returns the data symbol indices
// (flush steps carry no data and are skipped).
inline std::vector<int> forward_traceback(const Trellis& tr, const ForwardTables& ft) {
  std::vector<int> data(tr.fmt.data_len(), 0);
  int s = tr.final_state;
  for (int t = tr.n_steps; t >= 1; --t) {
    const int b = ft.surv_at(t, s);
    if (b < 0) throw std::logic_error("traceback hit an unreachable state");
    const TrellisBranch& br = tr.stages[t - 1].branches[b];
    if (tr.stages[t - 1].is_data) data[t - 1] = br.sym;
    s = br.from;
  }
  return data;
}

}  // namespace tpmlse
