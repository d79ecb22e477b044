#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "tpmlse/common.hpp"
#include "tpmlse/signal_model.hpp"

namespace tpmlse {

// One transition of the time-varying trellis.  `sym` is the data symbol
// index consumed by the step, or -1 when the step is forced (flush tail,
// where the transmitted value is pinned to zero).
struct TrellisBranch {
  int from = 0;
  int to = 0;
  int sym = -1;
};

// One step of the trellis.  Step st (0-based) consumes received sample
// T + st, i.e. moves the state from time st to time st + 1.
//
// `branches` is sorted by (to, from, sym): scanning a state's in-branch
// range visits predecessors in ascending state order, which is the
// documented deterministic tie-break for the add-compare-select.
// `out_ids` re-indexes the same branches sorted by (from, to, sym) for the
// backward sweep, with `out_begin` delimiting each from-state's range.
struct TrellisStage {
  bool is_data = false;
  std::vector<TrellisBranch> branches;
  std::vector<int> in_begin;   // size S+1, offsets into `branches` by to-state
  std::vector<int> out_ids;    // branch indices grouped by from-state
  std::vector<int> out_begin;  // size S+1, offsets into `out_ids`
  std::vector<int> reach_prev;  // reachable states at time st (ascending)
  std::vector<int> reach_cur;   // reachable states at time st + 1 (ascending)
};

// Precomputed trellis for one frame format.  States encode the P-1 most
// recently consumed transmit positions, newest in the lowest M bits.
// Positions outside the data region (training prefix, flush tail) are
// pinned: their digit in the state index is forced to zero, so the trellis
// narrows to a single state at both ends.
//
// Per-branch pools hold the P-sample regressor window u (newest first,
// training/flush values substituted where pinned) and the lag products
// conj(u[0]) * u[l] used by the accumulator recursions.
struct Trellis {
  FrameFormat fmt;
  int S = 1;        // interior state slot count, 2^(M*(P-1))
  int q = 2;        // constellation order
  int n_steps = 0;  // L - T
  int initial_state = 0;
  int final_state = 0;
  std::vector<TrellisStage> stages;
  cvec u_pool;    // total_branches * P
  cvec rho_pool;  // total_branches * P
  std::vector<int> pool_begin;  // per stage, offset of branch 0 in the pools

  const cplx* branch_u(int stage, int branch) const {
    return &u_pool[(pool_begin[stage] + branch) * static_cast<size_t>(fmt.P)];
  }
  const cplx* branch_rho(int stage, int branch) const {
    return &rho_pool[(pool_begin[stage] + branch) * static_cast<size_t>(fmt.P)];
  }
};

inline Trellis build_trellis(const FrameFormat& fmt) {
  fmt.validate();
  if (fmt.M * (fmt.P - 1) > 20) {
    throw std::invalid_argument("trellis state space too large");
  }
  Trellis tr;
  tr.fmt = fmt;
  tr.q = psk_order(fmt.M);
  tr.S = fmt.state_count();
  tr.n_steps = fmt.L() - fmt.T;
  tr.initial_state = 0;
  tr.final_state = 0;
  tr.stages.resize(tr.n_steps);
  tr.pool_begin.resize(tr.n_steps, 0);

  const int mask = tr.S - 1;
  // Value carried by transmit position `pos` when the state digit is `d`.
  const auto position_value = [&](int pos, int digit) -> cplx {
    if (pos < fmt.T) return fmt.training[pos];
    if (pos >= fmt.N) return cplx(0, 0);
    return psk_point(digit, fmt.M);
  };

  std::vector<int> reach = {tr.initial_state};
  int pool_off = 0;
  for (int st = 0; st < tr.n_steps; ++st) {
    TrellisStage& stage = tr.stages[st];
    tr.pool_begin[st] = pool_off;
    const int pos_new = fmt.T + st;
    stage.is_data = pos_new < fmt.N;
    stage.reach_prev = reach;

    // Generate in (from ascending, sym ascending) order.
    std::vector<TrellisBranch> raw;
    const int n_choices = stage.is_data ? tr.q : 1;
    raw.reserve(reach.size() * static_cast<size_t>(n_choices));
    for (const int from : reach) {
      for (int choice = 0; choice < n_choices; ++choice) {
        TrellisBranch b;
        b.from = from;
        b.sym = stage.is_data ? choice : -1;
        const int digit = stage.is_data ? choice : 0;
        b.to = ((from << fmt.M) | digit) & mask;
        raw.push_back(b);
      }
    }
    // Group by to-state; stable sort preserves the (from, sym) order inside
    // each group, so in-branch scans meet predecessors in ascending order.
    std::stable_sort(raw.begin(), raw.end(),
                     [](const TrellisBranch& a, const TrellisBranch& b) { return a.to < b.to; });
    stage.branches = std::move(raw);

    stage.in_begin.assign(tr.S + 1, 0);
    for (const auto& b : stage.branches) stage.in_begin[b.to + 1]++;
    for (int s = 0; s < tr.S; ++s) stage.in_begin[s + 1] += stage.in_begin[s];

    stage.out_ids.resize(stage.branches.size());
    for (size_t i = 0; i < stage.out_ids.size(); ++i) stage.out_ids[i] = static_cast<int>(i);
    std::stable_sort(stage.out_ids.begin(), stage.out_ids.end(), [&](int a, int b) {
      const TrellisBranch& ba = stage.branches[a];
      const TrellisBranch& bb = stage.branches[b];
      if (ba.from != bb.from) return ba.from < bb.from;
      if (ba.to != bb.to) return ba.to < bb.to;
      return ba.sym < bb.sym;
    });
    stage.out_begin.assign(tr.S + 1, 0);
    for (const int id : stage.out_ids) stage.out_begin[stage.branches[id].from + 1]++;
    for (int s = 0; s < tr.S; ++s) stage.out_begin[s + 1] += stage.out_begin[s];

    // Regressor windows and lag products.
    for (const auto& b : stage.branches) {
      const int digit_new = b.sym >= 0 ? b.sym : 0;
      cvec u(fmt.P);
      u[0] = position_value(pos_new, digit_new);
      for (int k = 1; k < fmt.P; ++k) {
        const int pos = pos_new - k;
        const int digit = (b.from >> (fmt.M * (k - 1))) & (tr.q - 1);
        u[k] = position_value(pos, digit);
      }
      for (int k = 0; k < fmt.P; ++k) tr.u_pool.push_back(u[k]);
      for (int l = 0; l < fmt.P; ++l) tr.rho_pool.push_back(std::conj(u[0]) * u[l]);
    }
    pool_off += static_cast<int>(stage.branches.size());

    std::vector<char> seen(tr.S, 0);
    stage.reach_cur.clear();
    for (const auto& b : stage.branches) {
      if (!seen[b.to]) {
        seen[b.to] = 1;
        stage.reach_cur.push_back(b.to);
      }
    }
    std::sort(stage.reach_cur.begin(), stage.reach_cur.end());
    reach = stage.reach_cur;
  }
  if (reach.size() != 1 || reach[0] != tr.final_state) {
    throw std::logic_error("trellis did not terminate in the flush state");
  }
  return tr;
}

}  // namespace tpmlse
