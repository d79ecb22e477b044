#pragma once
/**
 * Closed-form complex-multiply budgets for the three receivers.
 *
 * Per trellis branch the forward phase costs P + 2 multiplies and the
 * backward phase P^3 + 2P^2 + 5P (branch residual, cross-vector update and
 * the small dense solve).  With 2^(MP) branches per data step and N - T
 * decision steps the two-phase budget is their product; the conventional
 * detector pays only the residual part.  The exhaustive reference scores
 * every one of the 2^(M(N-T)) candidate sequences, bounded here by the
 * conventional 2^(MN+1) figure used for reporting.
 *
 * Values are doubles because the exhaustive budget overflows 64-bit
 * integers for long blocks; powers of two stay exactly representable.
 */

#include <cmath>

namespace tpmlse {

struct ComplexityBudget {
  double forward_per_branch = 0.0;   // P + 2
  double backward_per_branch = 0.0;  // P^3 + 2P^2 + 5P
  double total = 0.0;                // two-phase decode budget
  double conventional = 0.0;         // Euclidean-only decode budget
  double exhaustive = 0.0;           // brute-force reference budget
};

inline ComplexityBudget complexity_model(int m_bits, int p_taps, int n_total, int t_training) {
  const double p = p_taps;
  ComplexityBudget b;
  b.forward_per_branch = p + 2.0;
  b.backward_per_branch = p * p * p + 2.0 * p * p + 5.0 * p;
  const double branches = std::ldexp(1.0, m_bits * p_taps);
  const double steps = n_total - t_training;
  b.total = (b.forward_per_branch + b.backward_per_branch) * branches * steps;
  b.conventional = p * branches * steps;
  b.exhaustive =
      (b.forward_per_branch + b.backward_per_branch) * std::ldexp(1.0, m_bits * n_total + 1);
  return b;
}

}  // namespace tpmlse
