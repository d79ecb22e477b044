/**
 * Small end-to-end sweep over the short frame format: three receivers,
 * three Eb/N0 points, a few thousand blocks.  Writes results.csv, the
 * config echo and a plot script into ./mini_sweep_out (or the directory
 * given as the first argument).
 */

#include <cstdio>
#include <string>

#include "tpmlse/harness.hpp"

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "mini_sweep_out";
  const auto cfg = tpmlse::parse_config(R"({
    "N": 15, "T": 5, "P": 2, "M": 1,
    "training": [-1, -1, -1, 1, -1],
    "fading": "block_rayleigh",
    "ebn0_grid_db": [8.0, 12.0, 16.0],
    "schemes": ["TWO_PHASE_LS", "CONVENTIONAL_LS", "CONVENTIONAL_PERFECT_CSI"],
    "blocks_per_point": 4000,
    "min_word_errors": 0,
    "base_seed": 7
  })");
  const auto result = tpmlse::run_sweep(cfg, 1);
  tpmlse::write_outputs(result, out_dir);
  std::printf("%s", tpmlse::results_csv(result).c_str());
  std::printf("\nwrote %s/results.csv (plot with: python3 %s/plot_results.py)\n",
              out_dir.c_str(), out_dir.c_str());
  return 0;
}
