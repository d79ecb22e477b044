/**
 * Walk one short-format block end to end: draw a channel and noise, form
 * the least-squares estimate from the training prefix, then decode with
 * the conventional search and the two-phase search and compare against the
 * transmitted symbols.
 */

#include <cstdio>

#include "tpmlse/channel.hpp"
#include "tpmlse/two_phase.hpp"

int main() {
  using tpmlse::cplx;
  using tpmlse::cvec;

  tpmlse::FrameFormat fmt;
  fmt.N = 15;
  fmt.T = 5;
  fmt.P = 2;
  fmt.M = 1;
  fmt.training = {cplx(-1, 0), cplx(-1, 0), cplx(-1, 0), cplx(1, 0), cplx(-1, 0)};
  fmt.validate();
  const auto ctx = tpmlse::make_receiver_context(fmt);

  std::mt19937_64 rng(20260822);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<int> data;
  for (int i = 0; i < fmt.data_len(); ++i) data.push_back(bit(rng));
  const cvec seq = tpmlse::assemble_sequence(fmt, data);
  const cvec h = tpmlse::draw_block_taps(rng, fmt.P);
  const double ebn0_db = 12.0;
  const double noise_var = tpmlse::ebn0_to_noise_var(ebn0_db);
  const cvec noise = tpmlse::draw_cn_vector(rng, fmt.L(), noise_var);
  const cvec y = tpmlse::transmit(fmt, seq, h, noise);

  const cvec y_p(y.begin(), y.begin() + fmt.T);
  const cvec h_hat = tpmlse::ls_solve(ctx.gram_chol, ctx.bp, y_p)->h;
  std::printf("true taps      (%+.3f%+.3fi, %+.3f%+.3fi)\n", h[0].real(), h[0].imag(),
              h[1].real(), h[1].imag());
  std::printf("estimated taps (%+.3f%+.3fi, %+.3f%+.3fi)  [LS over %d training symbols]\n",
              h_hat[0].real(), h_hat[0].imag(), h_hat[1].real(), h_hat[1].imag(), fmt.T);

  tpmlse::ForwardTables ft;
  tpmlse::forward_pass(ctx.trellis, y, h_hat, ft, nullptr, false);
  const auto conv = tpmlse::forward_traceback(ctx.trellis, ft);

  tpmlse::TwoPhaseWorkspace ws;
  tpmlse::TwoPhaseDiagnostics diag;
  const auto tp = tpmlse::two_phase_decode(ctx, y, h_hat, ws, &diag);

  const auto show = [&](const char* label, const std::vector<int>& sym) {
    int errs = 0;
    std::printf("%-12s", label);
    for (size_t i = 0; i < sym.size(); ++i) {
      std::printf(" %d", sym[i]);
      errs += sym[i] != data[i] ? 1 : 0;
    }
    std::printf("   (%d symbol errors)\n", errs);
  };
  std::printf("\nEb/N0 = %.0f dB, %d data symbols\n", ebn0_db, fmt.data_len());
  show("sent", data);
  show("conventional", conv);
  show("two-phase", tp);
  std::printf("\nconventional Euclidean metric %.6f\n",
              ft.phi_at(ctx.trellis.n_steps, ctx.trellis.final_state));
  std::printf("two-phase corrected metric    %.6f (lambda fallbacks %llu)\n",
              ws.bwd.sel_at(0, ctx.trellis.initial_state),
              static_cast<unsigned long long>(diag.lambda_fallbacks));
  return 0;
}
