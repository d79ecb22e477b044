#pragma once
/**
 * Monte Carlo sweep harness.
 *
 * A sweep is described by a JSON config (frame format, fading model, Eb/N0
 * grid, receiver schemes, stopping rule, base seed).  Trials are generated
 * from counter-based per-block streams labeled "data" / "channel" /
 * "noise", so every receiver decodes the same received blocks (common
 * random numbers, also across grid points: only the noise amplitude
 * changes along the grid) and results are independent of the worker count:
 * workers partition whole blocks, accumulators are integer sums, and the
 * early-stop rule is evaluated only at fixed chunk boundaries.
 */

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tpmlse/channel.hpp"
#include "tpmlse/common.hpp"
#include "tpmlse/estimation.hpp"
#include "tpmlse/metric_oracle.hpp"
#include "tpmlse/signal_model.hpp"
#include "tpmlse/two_phase.hpp"

namespace tpmlse {

/// Early-stop checks happen only when the completed-block count is a
/// multiple of this, so the stop decision cannot depend on how blocks were
/// split across workers.
inline constexpr std::uint64_t kStopCheckChunk = 1000;

/// Two-sided 95% normal quantile used for the Wilson score intervals.
inline constexpr double kWilsonZ = 1.959963984540054;

enum class FadingModel { BLOCK_RAYLEIGH, GAUSS_MARKOV };

enum class Scheme {
  TWO_PHASE_LS,
  CONVENTIONAL_LS,
  EXHAUSTIVE_NEAR_ML,
  EXHAUSTIVE_FULL_ML,
  CONVENTIONAL_PERFECT_CSI,
  CONVENTIONAL_LMS,
};

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::TWO_PHASE_LS: return "TWO_PHASE_LS";
    case Scheme::CONVENTIONAL_LS: return "CONVENTIONAL_LS";
    case Scheme::EXHAUSTIVE_NEAR_ML: return "EXHAUSTIVE_NEAR_ML";
    case Scheme::EXHAUSTIVE_FULL_ML: return "EXHAUSTIVE_FULL_ML";
    case Scheme::CONVENTIONAL_PERFECT_CSI: return "CONVENTIONAL_PERFECT_CSI";
    case Scheme::CONVENTIONAL_LMS: return "CONVENTIONAL_LMS";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& name) {
  for (const Scheme s : {Scheme::TWO_PHASE_LS, Scheme::CONVENTIONAL_LS,
                         Scheme::EXHAUSTIVE_NEAR_ML, Scheme::EXHAUSTIVE_FULL_ML,
                         Scheme::CONVENTIONAL_PERFECT_CSI, Scheme::CONVENTIONAL_LMS}) {
    if (name == scheme_name(s)) return s;
  }
  throw std::invalid_argument("unknown scheme: " + name);
}

inline const char* fading_name(FadingModel f) {
  return f == FadingModel::BLOCK_RAYLEIGH ? "block_rayleigh" : "gauss_markov";
}

inline FadingModel fading_from_name(const std::string& name) {
  if (name == "block_rayleigh") return FadingModel::BLOCK_RAYLEIGH;
  if (name == "gauss_markov") return FadingModel::GAUSS_MARKOV;
  throw std::invalid_argument("unknown fading model: " + name);
}

struct SimConfig {
  FrameFormat format;
  FadingModel fading = FadingModel::BLOCK_RAYLEIGH;
  double gm_alpha = 1.0;
  std::vector<double> ebn0_grid_db;
  std::vector<Scheme> schemes;
  std::uint64_t blocks_per_point = 0;
  std::uint64_t min_word_errors = 200;
  std::uint64_t base_seed = 0;

  void validate() const {
    format.validate();
    if (ebn0_grid_db.empty()) throw std::invalid_argument("ebn0_grid_db must be non-empty");
    if (blocks_per_point == 0) throw std::invalid_argument("blocks_per_point must be positive");
    for (const Scheme s : schemes) {
      if (s == Scheme::CONVENTIONAL_LMS && fading != FadingModel::GAUSS_MARKOV) {
        throw std::invalid_argument("CONVENTIONAL_LMS requires gauss_markov fading");
      }
      if ((s == Scheme::EXHAUSTIVE_NEAR_ML || s == Scheme::EXHAUSTIVE_FULL_ML) &&
          format.M * (format.N - format.T) > 20) {
        throw std::invalid_argument("exhaustive scheme infeasible: M*(N-T) exceeds 20");
      }
    }
    if (fading == FadingModel::GAUSS_MARKOV && (gm_alpha < 0.0 || gm_alpha > 1.0)) {
      throw std::invalid_argument("gm_alpha must lie in [0, 1]");
    }
  }

  std::string to_json_text() const {
    nlohmann::json j;
    j["N"] = format.N;
    j["T"] = format.T;
    j["P"] = format.P;
    j["M"] = format.M;
    auto& tr = j["training"] = nlohmann::json::array();
    for (const cplx& b : format.training) tr.push_back({b.real(), b.imag()});
    j["fading"] = fading_name(fading);
    if (fading == FadingModel::GAUSS_MARKOV) j["gm_alpha"] = gm_alpha;
    j["ebn0_grid_db"] = ebn0_grid_db;
    auto& sc = j["schemes"] = nlohmann::json::array();
    for (const Scheme s : schemes) sc.push_back(scheme_name(s));
    j["blocks_per_point"] = blocks_per_point;
    j["min_word_errors"] = min_word_errors;
    j["base_seed"] = base_seed;
    return j.dump(2) + "\n";
  }
};

inline SimConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

  static const std::vector<std::string> known = {
      "N",      "T",           "P",       "M",
      "training", "fading",    "gm_alpha", "ebn0_grid_db",
      "schemes", "blocks_per_point", "min_word_errors", "base_seed"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw std::invalid_argument("unknown config key: " + item.key());
    }
  }
  static const std::vector<std::string> required = {
      "N", "T", "P", "M", "training", "fading", "ebn0_grid_db",
      "schemes", "blocks_per_point", "base_seed"};
  for (const auto& key : required) {
    if (!j.contains(key)) throw std::invalid_argument("missing config key: " + key);
  }

  SimConfig cfg;
  try {
    cfg.format.N = j.at("N").get<int>();
    cfg.format.T = j.at("T").get<int>();
    cfg.format.P = j.at("P").get<int>();
    cfg.format.M = j.at("M").get<int>();
    for (const auto& e : j.at("training")) {
      if (e.is_number()) {
        cfg.format.training.emplace_back(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2) {
        cfg.format.training.emplace_back(e[0].get<double>(), e[1].get<double>());
      } else {
        throw std::invalid_argument("training entries must be numbers or [re, im] pairs");
      }
    }
    cfg.fading = fading_from_name(j.at("fading").get<std::string>());
    if (cfg.fading == FadingModel::GAUSS_MARKOV) {
      if (!j.contains("gm_alpha")) {
        throw std::invalid_argument("gauss_markov fading requires gm_alpha");
      }
      cfg.gm_alpha = j.at("gm_alpha").get<double>();
    } else if (j.contains("gm_alpha")) {
      throw std::invalid_argument("gm_alpha is only valid with gauss_markov fading");
    }
    cfg.ebn0_grid_db = j.at("ebn0_grid_db").get<std::vector<double>>();
    for (const auto& s : j.at("schemes")) {
      cfg.schemes.push_back(scheme_from_name(s.get<std::string>()));
    }
    const auto read_u64 = [&](const char* key, std::int64_t fallback) {
      if (!j.contains(key)) return static_cast<std::uint64_t>(fallback);
      const std::int64_t v = j.at(key).get<std::int64_t>();
      if (v < 0) throw std::invalid_argument(std::string(key) + " must be nonnegative");
      return static_cast<std::uint64_t>(v);
    };
    cfg.blocks_per_point = read_u64("blocks_per_point", 0);
    cfg.min_word_errors = read_u64("min_word_errors", 200);
    cfg.base_seed = read_u64("base_seed", 0);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline SimConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// One simulated block: drawn data symbols, the received vector, and the
// channel realization (h for block fading, per-sample trajectory for
// Gauss-Markov fading; the other member stays empty).
struct TrialData {
  std::vector<int> data;
  cvec y;
  cvec h;
  std::vector<cvec> trajectory;
};

inline TrialData draw_trial(const SimConfig& cfg, size_t point_index, std::uint64_t block) {
  const FrameFormat& fmt = cfg.format;
  TrialData td;
  auto rng_data = make_stream(cfg.base_seed, block, "data");
  std::uniform_int_distribution<int> pick_sym(0, psk_order(fmt.M) - 1);
  td.data.resize(fmt.data_len());
  for (int& s : td.data) s = pick_sym(rng_data);
  const cvec seq = assemble_sequence(fmt, td.data);

  auto rng_noise = make_stream(cfg.base_seed, block, "noise");
  const double noise_var = ebn0_to_noise_var(cfg.ebn0_grid_db.at(point_index));
  const cvec noise = draw_cn_vector(rng_noise, fmt.L(), noise_var);

  auto rng_channel = make_stream(cfg.base_seed, block, "channel");
  if (cfg.fading == FadingModel::BLOCK_RAYLEIGH) {
    td.h = draw_block_taps(rng_channel, fmt.P);
    td.y = transmit(fmt, seq, td.h, noise);
  } else {
    td.trajectory = evolve_gauss_markov(rng_channel, cfg.gm_alpha, fmt.P, fmt.L());
    td.y = transmit_time_varying(fmt, seq, td.trajectory, noise);
  }
  return td;
}

struct PointStats {
  std::uint64_t blocks = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t word_errors = 0;
  std::uint64_t mult_count_total = 0;
  std::uint64_t lambda_fallbacks = 0;
};

struct SweepResult {
  SimConfig cfg;
  // stats[point][scheme], both in config order.
  std::vector<std::vector<PointStats>> stats;
};

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
  double half = 0.5;
};

inline WilsonInterval wilson_interval(std::uint64_t k, std::uint64_t n, double z = kWilsonZ) {
  if (n == 0) return {0.0, 1.0, 0.5};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  WilsonInterval w;
  w.half = half;
  w.lo = std::max(0.0, center - half);
  w.hi = std::min(1.0, center + half);
  return w;
}

namespace detail {

// Decode one trial with one scheme and fold the outcome into `st`.
inline void run_scheme_on_trial(const SimConfig& cfg, const ReceiverContext& ctx, Scheme scheme,
                                const TrialData& td, double noise_var, double lms_mu,
                                TwoPhaseWorkspace& ws, PointStats& st) {
  const FrameFormat& fmt = cfg.format;
  MultCounter mc;
  std::vector<int> dec;
  const auto ls_taps = [&]() {
    const cvec y_p(td.y.begin(), td.y.begin() + fmt.T);
    return ls_solve(ctx.gram_chol, ctx.bp, y_p, &mc)->h;
  };
  switch (scheme) {
    case Scheme::TWO_PHASE_LS: {
      TwoPhaseDiagnostics diag;
      dec = two_phase_decode(ctx, td.y, ls_taps(), ws, &diag, &mc);
      st.lambda_fallbacks += diag.lambda_fallbacks;
      break;
    }
    case Scheme::CONVENTIONAL_LS: {
      forward_pass(ctx.trellis, td.y, ls_taps(), ws.fwd, &mc, false);
      dec = forward_traceback(ctx.trellis, ws.fwd);
      break;
    }
    case Scheme::EXHAUSTIVE_NEAR_ML:
    case Scheme::EXHAUSTIVE_FULL_ML: {
      const auto crit = scheme == Scheme::EXHAUSTIVE_NEAR_ML ? DecodeCriterion::NEAR_ML
                                                             : DecodeCriterion::FULL_ML;
      dec = exhaustive_decode(fmt, td.y, ls_taps(), noise_var, crit, &mc).data;
      break;
    }
    case Scheme::CONVENTIONAL_PERFECT_CSI: {
      if (cfg.fading == FadingModel::BLOCK_RAYLEIGH) {
        forward_pass(ctx.trellis, td.y, td.h, ws.fwd, &mc, false);
      } else {
        forward_pass_time_varying(ctx.trellis, td.y, td.trajectory, ws.fwd, &mc);
      }
      dec = forward_traceback(ctx.trellis, ws.fwd);
      break;
    }
    case Scheme::CONVENTIONAL_LMS: {
      forward_pass_lms(ctx.trellis, td.y, ls_taps(), lms_mu, ws.fwd, &mc);
      dec = forward_traceback(ctx.trellis, ws.fwd);
      break;
    }
  }
  st.blocks += 1;
  st.mult_count_total += mc.count;
  std::uint64_t bits = 0;
  for (int i = 0; i < fmt.data_len(); ++i) {
    bits += symbol_bit_errors(dec[i], td.data[i], fmt.M);
  }
  st.bit_errors += bits;
  if (bits > 0) st.word_errors += 1;
}

}  // namespace detail

inline SweepResult run_sweep(const SimConfig& cfg, int workers = 1) {
  cfg.validate();
  const ReceiverContext ctx = make_receiver_context(cfg.format);
  const double lms_mu =
      cfg.fading == FadingModel::GAUSS_MARKOV ? lms_step_size(cfg.gm_alpha) : 0.0;
  const size_t n_schemes = cfg.schemes.size();

  SweepResult result;
  result.cfg = cfg;
  for (size_t pt = 0; pt < cfg.ebn0_grid_db.size(); ++pt) {
    const double noise_var = ebn0_to_noise_var(cfg.ebn0_grid_db[pt]);
    std::vector<PointStats> row(n_schemes);
    std::uint64_t done = 0;
    while (done < cfg.blocks_per_point) {
      const std::uint64_t chunk = std::min<std::uint64_t>(kStopCheckChunk,
                                                          cfg.blocks_per_point - done);
      const int wk = std::max(1, std::min<int>(workers, static_cast<int>(chunk)));
      std::vector<std::vector<PointStats>> partial(
          wk, std::vector<PointStats>(n_schemes));
      std::vector<std::exception_ptr> errors(wk);
      const auto body = [&](int w) {
        try {
          TwoPhaseWorkspace ws;
          const std::uint64_t per = chunk / wk;
          const std::uint64_t extra = chunk % wk;
          const std::uint64_t begin =
              done + w * per + std::min<std::uint64_t>(w, extra);
          const std::uint64_t end = begin + per + (static_cast<std::uint64_t>(w) < extra ? 1 : 0);
          for (std::uint64_t block = begin; block < end; ++block) {
            const TrialData td = draw_trial(cfg, pt, block);
            for (size_t si = 0; si < n_schemes; ++si) {
              detail::run_scheme_on_trial(cfg, ctx, cfg.schemes[si], td, noise_var, lms_mu, ws,
                                          partial[w][si]);
            }
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (wk == 1) {
        body(0);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < wk; ++w) pool.emplace_back(body, w);
        for (auto& th : pool) th.join();
      }
      for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
      }
      for (int w = 0; w < wk; ++w) {
        for (size_t si = 0; si < n_schemes; ++si) {
          row[si].blocks += partial[w][si].blocks;
          row[si].bit_errors += partial[w][si].bit_errors;
          row[si].word_errors += partial[w][si].word_errors;
          row[si].mult_count_total += partial[w][si].mult_count_total;
          row[si].lambda_fallbacks += partial[w][si].lambda_fallbacks;
        }
      }
      done += chunk;
      if (cfg.min_word_errors > 0 && !row.empty()) {
        bool all_met = true;
        for (const auto& st : row) {
          if (st.word_errors < cfg.min_word_errors) all_met = false;
        }
        if (all_met) break;
      }
    }
    result.stats.push_back(std::move(row));
  }
  return result;
}

inline std::string results_csv(const SweepResult& result) {
  std::string out =
      "scheme,ebn0_db,blocks,bit_errors,word_errors,ber,wer,ber_ci_half,wer_ci_half,"
      "mult_count_total,lambda_fallbacks,seed\n";
  const std::uint64_t bits_per_block =
      static_cast<std::uint64_t>(result.cfg.format.data_len()) * result.cfg.format.M;
  char buf[512];
  for (size_t pt = 0; pt < result.stats.size(); ++pt) {
    for (size_t si = 0; si < result.stats[pt].size(); ++si) {
      const PointStats& st = result.stats[pt][si];
      const std::uint64_t bits = st.blocks * bits_per_block;
      const double ber = bits > 0 ? static_cast<double>(st.bit_errors) / bits : 0.0;
      const double wer =
          st.blocks > 0 ? static_cast<double>(st.word_errors) / st.blocks : 0.0;
      const double ber_half = wilson_interval(st.bit_errors, bits).half;
      const double wer_half = wilson_interval(st.word_errors, st.blocks).half;
      std::snprintf(buf, sizeof(buf),
                    "%s,%.10g,%llu,%llu,%llu,%.12g,%.12g,%.12g,%.12g,%llu,%llu,%llu\n",
                    scheme_name(result.cfg.schemes[si]), result.cfg.ebn0_grid_db[pt],
                    static_cast<unsigned long long>(st.blocks),
                    static_cast<unsigned long long>(st.bit_errors),
                    static_cast<unsigned long long>(st.word_errors), ber, wer, ber_half,
                    wer_half, static_cast<unsigned long long>(st.mult_count_total),
                    static_cast<unsigned long long>(st.lambda_fallbacks),
                    static_cast<unsigned long long>(result.cfg.base_seed));
      out += buf;
    }
  }
  return out;
}

inline const char* plot_script_text() {
  return R"PY(#!/usr/bin/env python3
"""Plot BER/WER curves from results.csv in this directory (matplotlib)."""
import collections
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "results.csv"), newline="") as f:
    rows = list(csv.DictReader(f))
series = collections.defaultdict(list)
for row in rows:
    series[row["scheme"]].append(row)

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5), sharex=True)
for name, rs in sorted(series.items()):
    rs = sorted(rs, key=lambda r: float(r["ebn0_db"]))
    x = [float(r["ebn0_db"]) for r in rs]
    for ax, key in zip(axes, ("ber", "wer")):
        y = [max(float(r[key]), 1e-12) for r in rs]
        ax.semilogy(x, y, marker="o", markersize=4, label=name)
axes[0].set_ylabel("bit error rate")
axes[1].set_ylabel("word error rate")
for ax in axes:
    ax.set_xlabel("Eb/N0 (dB)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
fig.tight_layout()
out = os.path.join(here, "curves.png")
fig.savefig(out, dpi=160)
print("wrote", out)
)PY";
}

inline void write_outputs(const SweepResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir + "/results.csv", std::ios::binary);
    f << results_csv(result);
  }
  {
    std::ofstream f(out_dir + "/config.json", std::ios::binary);
    f << result.cfg.to_json_text();
  }
  {
    std::ofstream f(out_dir + "/plot_results.py", std::ios::binary);
    f << plot_script_text();
  }
}

}  // namespace tpmlse
