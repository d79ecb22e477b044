#pragma once
/**
 * Block signal model for a frequency-selective channel with P taps.
 *
 * One block carries N symbols (a T-symbol training prefix followed by N-T
 * data symbols) and is terminated by P-1 zero flush symbols, so the channel
 * sees L = N + P - 1 input positions and produces L received samples
 * y = B h + n.  B stacks the T x P training matrix bp over the (L-T) x P
 * data matrix bd; row s of the stack holds the P most recent symbols
 * [b_s, b_{s-1}, ..., b_{s-P+1}] (zeros outside the block).
 */

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpmlse/common.hpp"

namespace tpmlse {

/// Geometry and fixed symbols of one transmitted block.
struct FrameFormat {
  int N = 0;      ///< training + data symbols (excludes flush zeros)
  int T = 0;      ///< training prefix length
  int P = 0;      ///< channel taps
  int M = 1;      ///< bits per PSK symbol
  cvec training;  ///< T unit-modulus training symbols

  int L() const { return N + P - 1; }
  int data_len() const { return N - T; }
  int data_bits() const { return (N - T) * M; }
  int state_count() const { return 1 << (M * (P - 1)); }

  void validate() const {
    if (P < 1) throw std::invalid_argument("FrameFormat: P must be >= 1");
    if (M < 1 || M > 8) throw std::invalid_argument("FrameFormat: M must be in [1, 8]");
    if (T < P) throw std::invalid_argument("FrameFormat: T must be >= P");
    if (N <= T) throw std::invalid_argument("FrameFormat: N must exceed T");
    if (static_cast<int>(training.size()) != T) {
      throw std::invalid_argument("FrameFormat: training length must equal T");
    }
    for (const auto& b : training) {
      if (std::abs(std::abs(b) - 1.0) > 1e-9) {
        throw std::invalid_argument("FrameFormat: training symbols must be unit modulus");
      }
    }
  }
};

/// Minimal row-major complex matrix.
struct CMatrix {
  int rows = 0;
  int cols = 0;
  cvec a;

  CMatrix() = default;
  CMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, cplx(0.0, 0.0)) {}

  cplx& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  const cplx& at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

/// Training matrix bp stacked over data matrix bd for one symbol sequence.
struct ConvolutionMatrices {
  CMatrix bp;  ///< T x P
  CMatrix bd;  ///< (L-T) x P
};

/// Symbol at padded position s (0-based): zero outside [0, L).
inline cplx padded_symbol(const cvec& full_seq, int s) {
  if (s < 0 || s >= static_cast<int>(full_seq.size())) return {0.0, 0.0};
  return full_seq[s];
}

/// Full length-L sequence: training, then PSK-mapped data indices, then
/// P-1 zero flush symbols.
inline cvec assemble_sequence(const FrameFormat& fmt, const std::vector<int>& data_indices) {
  if (static_cast<int>(data_indices.size()) != fmt.data_len()) {
    throw std::invalid_argument("assemble_sequence: need N-T data indices");
  }
  cvec seq(fmt.L(), cplx(0.0, 0.0));
  for (int s = 0; s < fmt.T; ++s) seq[s] = fmt.training[s];
  for (int i = 0; i < fmt.data_len(); ++i) seq[fmt.T + i] = psk_point(data_indices[i], fmt.M);
  return seq;
}

/// Same, with explicit data symbol values (diagnostics paths).
inline cvec assemble_sequence_values(const FrameFormat& fmt, const cvec& data_values) {
  if (static_cast<int>(data_values.size()) != fmt.data_len()) {
    throw std::invalid_argument("assemble_sequence_values: need N-T data symbols");
  }
  cvec seq(fmt.L(), cplx(0.0, 0.0));
  for (int s = 0; s < fmt.T; ++s) seq[s] = fmt.training[s];
  for (int i = 0; i < fmt.data_len(); ++i) seq[fmt.T + i] = data_values[i];
  return seq;
}

/// Build bp ((T x P), rows 0..T-1) and bd ((L-T x P), rows for samples
/// T..L-1) from a full length-L sequence.
inline ConvolutionMatrices build_matrices(const FrameFormat& fmt, const cvec& full_seq) {
  if (static_cast<int>(full_seq.size()) != fmt.L()) {
    throw std::invalid_argument("build_matrices: sequence length must be L");
  }
  ConvolutionMatrices out;
  out.bp = CMatrix(fmt.T, fmt.P);
  for (int r = 0; r < fmt.T; ++r) {
    for (int k = 0; k < fmt.P; ++k) out.bp.at(r, k) = padded_symbol(full_seq, r - k);
  }
  out.bd = CMatrix(fmt.L() - fmt.T, fmt.P);
  for (int r = 0; r < fmt.L() - fmt.T; ++r) {
    for (int k = 0; k < fmt.P; ++k) out.bd.at(r, k) = padded_symbol(full_seq, fmt.T + r - k);
  }
  return out;
}

inline cvec mat_vec(const CMatrix& m, const cvec& x) {
  if (static_cast<int>(x.size()) != m.cols) throw std::invalid_argument("mat_vec: size mismatch");
  cvec y(m.rows, cplx(0.0, 0.0));
  for (int r = 0; r < m.rows; ++r) {
    cplx acc(0.0, 0.0);
    for (int c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

/// m^H x (adjoint product).
inline cvec adj_vec(const CMatrix& m, const cvec& x) {
  if (static_cast<int>(x.size()) != m.rows) throw std::invalid_argument("adj_vec: size mismatch");
  cvec y(m.cols, cplx(0.0, 0.0));
  for (int c = 0; c < m.cols; ++c) {
    cplx acc(0.0, 0.0);
    for (int r = 0; r < m.rows; ++r) acc += std::conj(m.at(r, c)) * x[r];
    y[c] = acc;
  }
  return y;
}

/// m^H m (Hermitian Gram matrix, full storage).
inline CMatrix gram(const CMatrix& m) {
  CMatrix g(m.cols, m.cols);
  for (int i = 0; i < m.cols; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      cplx acc(0.0, 0.0);
      for (int r = 0; r < m.rows; ++r) acc += std::conj(m.at(r, i)) * m.at(r, j);
      g.at(i, j) = acc;
    }
  }
  return g;
}

/// Received block for constant taps: y_s = sum_k h_k b_{s-k} + n_s.
inline cvec transmit(const FrameFormat& fmt, const cvec& full_seq, const cvec& taps,
                     const cvec& noise) {
  if (static_cast<int>(taps.size()) != fmt.P) throw std::invalid_argument("transmit: need P taps");
  if (static_cast<int>(noise.size()) != fmt.L()) {
    throw std::invalid_argument("transmit: need L noise samples");
  }
  cvec y(fmt.L(), cplx(0.0, 0.0));
  for (int s = 0; s < fmt.L(); ++s) {
    cplx acc(0.0, 0.0);
    for (int k = 0; k < fmt.P; ++k) acc += taps[k] * padded_symbol(full_seq, s - k);
    y[s] = acc + noise[s];
  }
  return y;
}

/// Received block when the taps move sample by sample: sample s uses
/// trajectory[s].
inline cvec transmit_time_varying(const FrameFormat& fmt, const cvec& full_seq,
                                  const std::vector<cvec>& trajectory, const cvec& noise) {
  if (static_cast<int>(trajectory.size()) != fmt.L()) {
    throw std::invalid_argument("transmit_time_varying: need L tap vectors");
  }
  if (static_cast<int>(noise.size()) != fmt.L()) {
    throw std::invalid_argument("transmit_time_varying: need L noise samples");
  }
  cvec y(fmt.L(), cplx(0.0, 0.0));
  for (int s = 0; s < fmt.L(); ++s) {
    const cvec& h = trajectory[s];
    if (static_cast<int>(h.size()) != fmt.P) {
      throw std::invalid_argument("transmit_time_varying: tap vector size mismatch");
    }
    cplx acc(0.0, 0.0);
    for (int k = 0; k < fmt.P; ++k) acc += h[k] * padded_symbol(full_seq, s - k);
    y[s] = acc + noise[s];
  }
  return y;
}

/// Noise variance for a given Eb/N0 in dB (unit symbol energy, unit average
/// channel gain): var = 10^(-ebn0_db/10).
inline double ebn0_to_noise_var(double ebn0_db) { return std::pow(10.0, -ebn0_db / 10.0); }

}  // namespace tpmlse
