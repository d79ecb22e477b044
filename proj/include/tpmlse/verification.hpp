#pragma once
/**
 * Self-check routines shared by the command-line `verify` subcommand and
 * the acceptance binary: randomized instance sweeps that compare the
 * recursive receiver against the dense oracle and the exhaustive search.
 */

#include <algorithm>
#include <cstdint>
#include <random>

#include "tpmlse/channel.hpp"
#include "tpmlse/metric_oracle.hpp"
#include "tpmlse/two_phase.hpp"

namespace tpmlse {

struct VerifyInstance {
  FrameFormat fmt;
  std::vector<int> data;
  cvec y;
  cvec h;
  cvec h_hat;
  double noise_var = 0.0;
};

// Random instance with a least-squares estimate from its own training
// prefix; re-draws in the (synthetic) case of a singular training Gram.
inline VerifyInstance draw_verify_instance(std::mt19937_64& rng, int p_min, int p_max,
                                           int m_max, int n_max, double snr_lo_db,
                                           double snr_hi_db) {
  for (;;) {
    VerifyInstance ins;
    std::uniform_int_distribution<int> pick_p(p_min, p_max);
    std::uniform_int_distribution<int> pick_m(1, m_max);
    ins.fmt.P = pick_p(rng);
    ins.fmt.M = pick_m(rng);
    std::uniform_int_distribution<int> pick_t(std::max(ins.fmt.P, 2), 6);
    ins.fmt.T = pick_t(rng);
    std::uniform_int_distribution<int> pick_n(ins.fmt.T + 1, std::max(ins.fmt.T + 1, n_max));
    ins.fmt.N = pick_n(rng);
    std::uniform_int_distribution<int> pick_sym(0, psk_order(ins.fmt.M) - 1);
    for (int i = 0; i < ins.fmt.T; ++i) {
      ins.fmt.training.push_back(psk_point(pick_sym(rng), ins.fmt.M));
    }
    ins.fmt.validate();
    for (int i = 0; i < ins.fmt.data_len(); ++i) ins.data.push_back(pick_sym(rng));
    const cvec seq = assemble_sequence(ins.fmt, ins.data);
    ins.h = draw_block_taps(rng, ins.fmt.P);
    std::uniform_real_distribution<double> snr(snr_lo_db, snr_hi_db);
    ins.noise_var = ebn0_to_noise_var(snr(rng));
    const cvec noise = draw_cn_vector(rng, ins.fmt.L(), ins.noise_var);
    ins.y = transmit(ins.fmt, seq, ins.h, noise);
    const auto mats = build_matrices(ins.fmt, seq);
    const cvec y_p(ins.y.begin(), ins.y.begin() + ins.fmt.T);
    const auto est = ls_estimate(mats.bp, y_p);
    if (!est.has_value()) continue;
    ins.h_hat = est->h;
    return ins;
  }
}

struct IdentityCheckSummary {
  int instances = 0;
  int failures = 0;
  double max_rel_error = 0.0;
  std::uint64_t lambda_fallbacks = 0;
};

// Single-path identity: constrained to one known sequence, the recursive
// bookkeeping must reproduce the whole-block oracle (cross vector, dense
// matrix, correction, corrected metric) at every interior time.
inline IdentityCheckSummary verify_single_path_identity(int n_instances, std::uint64_t seed,
                                                        double tol = 1e-9) {
  std::mt19937_64 rng(seed);
  IdentityCheckSummary sum;
  for (int i = 0; i < n_instances; ++i) {
    const VerifyInstance ins = draw_verify_instance(rng, 2, 3, 2, 12, 0.0, 20.0);
    const auto ctx = make_receiver_context(ins.fmt);
    const auto rep = single_path_metrics(ctx, ins.y, ins.h_hat, ins.data);
    sum.lambda_fallbacks += rep.lambda_fallbacks;

    const cvec seq = assemble_sequence(ins.fmt, ins.data);
    const auto mats = build_matrices(ins.fmt, seq);
    const cvec y_d(ins.y.begin() + ins.fmt.T, ins.y.end());
    const auto oracle = evaluate_metrics(mats.bd, ctx.gram, y_d, ins.h_hat, ins.noise_var);
    cvec resid = y_d;
    for (int r = 0; r < mats.bd.rows; ++r) {
      for (int k = 0; k < ins.fmt.P; ++k) resid[r] -= mats.bd.at(r, k) * ins.h_hat[k];
    }
    const cvec w = adj_vec(mats.bd, resid);
    const auto gd = gram(mats.bd);

    double worst = 0.0;
    CMatrix d;
    const int n_steps = ins.fmt.L() - ins.fmt.T;
    for (int t = 0; t <= n_steps; ++t) {
      for (int l = 0; l < ins.fmt.P; ++l) {
        worst = std::max(worst, std::abs(rep.r[t][l] - w[l]) / (1.0 + std::abs(w[l])));
      }
      detail::assemble_dense(ctx.d_const, rep.psi[t], d);
      for (int a = 0; a < ins.fmt.P; ++a) {
        for (int b = 0; b < ins.fmt.P; ++b) {
          const cplx expect = ctx.gram.at(a, b) + gd.at(a, b);
          worst = std::max(worst, std::abs(d.at(a, b) - expect) / (1.0 + std::abs(expect)));
        }
      }
      worst = std::max(worst,
                       std::abs(rep.lambda[t] - oracle.correction) / (1.0 + oracle.correction));
      worst = std::max(worst, std::abs(rep.sigma[t] - oracle.near_ml) / (1.0 + oracle.near_ml));
    }
    sum.instances += 1;
    sum.max_rel_error = std::max(sum.max_rel_error, worst);
    if (worst > tol) sum.failures += 1;
  }
  return sum;
}

struct AgreementSummary {
  int instances = 0;
  int mismatches = 0;
};

// The forward add-compare-select must reproduce the exhaustive Euclidean
// search exactly (same decoded symbols) on every feasible instance.
inline AgreementSummary verify_conventional_matches_exhaustive(int n_instances,
                                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AgreementSummary sum;
  ForwardTables ft;
  for (int i = 0; i < n_instances; ++i) {
    VerifyInstance ins = draw_verify_instance(rng, 1, 3, 2, 12, 0.0, 20.0);
    while (ins.fmt.M * (ins.fmt.N - ins.fmt.T) > 16) {
      ins = draw_verify_instance(rng, 1, 3, 2, 12, 0.0, 20.0);
    }
    const auto tr = build_trellis(ins.fmt);
    forward_pass(tr, ins.y, ins.h_hat, ft, nullptr, false);
    const auto dec = forward_traceback(tr, ft);
    const auto ex =
        exhaustive_decode(ins.fmt, ins.y, ins.h_hat, ins.noise_var, DecodeCriterion::EUCLIDEAN);
    sum.instances += 1;
    if (dec != ex.data) sum.mismatches += 1;
  }
  return sum;
}

}  // namespace tpmlse
