#pragma once
/**
 * Fading channel simulators.
 *
 * Block Rayleigh: P i.i.d. taps h_k ~ CN(0, 1/P), constant over one block.
 * Gauss-Markov:   h_t = alpha h_{t-1} + sqrt(1-alpha^2) v_t with
 *                 v_t ~ CN(0, (1/P) I) and a stationary start h_0, so the
 *                 per-tap power stays 1/P at every sample and the lag-k
 *                 correlation is alpha^k.
 */

#include <stdexcept>
#include <vector>

#include "tpmlse/common.hpp"

namespace tpmlse {

/// One block-fading draw: P taps, i.i.d. CN(0, 1/P).
inline cvec draw_block_taps(std::mt19937_64& rng, int p_taps) {
  if (p_taps < 1) throw std::invalid_argument("draw_block_taps: P must be >= 1");
  return draw_cn_vector(rng, p_taps, 1.0 / p_taps);
}

/// Tap trajectory h_1..h_len of a first-order Gauss-Markov process with a
/// stationary initial state h_0 (drawn internally, not returned).
inline std::vector<cvec> evolve_gauss_markov(std::mt19937_64& rng, double alpha, int p_taps,
                                             int len) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("evolve_gauss_markov: alpha must be in [0, 1]");
  }
  if (p_taps < 1) throw std::invalid_argument("evolve_gauss_markov: P must be >= 1");
  if (len < 1) throw std::invalid_argument("evolve_gauss_markov: len must be >= 1");

  const double tap_var = 1.0 / p_taps;
  const double innov = std::sqrt(1.0 - alpha * alpha);
  std::vector<cvec> traj;
  traj.reserve(len);
  cvec h = draw_cn_vector(rng, p_taps, tap_var);  // stationary h_0
  for (int t = 1; t <= len; ++t) {
    const cvec v = draw_cn_vector(rng, p_taps, tap_var);
    for (int k = 0; k < p_taps; ++k) h[k] = alpha * h[k] + innov * v[k];
    traj.push_back(h);
  }
  return traj;
}

}  // namespace tpmlse
