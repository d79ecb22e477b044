#pragma once
/**
 * Shared primitives: complex aliases, PSK constellation helpers, deterministic
 * labeled random streams, and complex-multiplication counting.
 */

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tpmlse {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;

/// Constellation size for M bits per symbol.
inline int psk_order(int m_bits) { return 1 << m_bits; }

/// PSK point exp(i*2*pi*index/2^M), natural binary indexing.
/// BPSK: index 0 -> +1, index 1 -> -1.  Axis points are returned exactly.
inline cplx psk_point(int index, int m_bits) {
  const int q = 1 << m_bits;
  const int k = ((index % q) + q) % q;
  if ((4 * k) % q == 0) {
    switch ((4 * k) / q) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  const double ang = 2.0 * kPi * k / q;
  return {std::cos(ang), std::sin(ang)};
}

/// Hamming distance between two symbol indices, counting the M label bits.
inline int symbol_bit_errors(int a, int b, int m_bits) {
  unsigned x = static_cast<unsigned>(a ^ b) & ((1u << m_bits) - 1u);
  int n = 0;
  while (x) {
    n += x & 1u;
    x >>= 1;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Deterministic labeled random streams.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Seed for the (base_seed, trial_index, label) stream.  Equal inputs give
/// equal streams on every run, independent of worker layout; distinct labels
/// ("data", "channel", "noise") give decorrelated streams for the same trial.
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t trial_index,
                                 std::string_view label) {
  std::uint64_t s = base_seed ^ (0x9E3779B97F4A7C15ull + fnv1a(label));
  const std::uint64_t h = splitmix64(s);
  s ^= trial_index * 0xD1342543DE82EF95ull + h;
  return splitmix64(s);
}

inline std::mt19937_64 make_stream(std::uint64_t base_seed, std::uint64_t trial_index,
                                   std::string_view label) {
  return std::mt19937_64(stream_seed(base_seed, trial_index, label));
}

/// One draw from a circularly-symmetric complex Gaussian CN(0, var):
/// independent real and imaginary parts with variance var/2 each.
inline cplx draw_cn(std::mt19937_64& rng, double var) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 * var));
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

inline cvec draw_cn_vector(std::mt19937_64& rng, int n, double var) {
  cvec v(n);
  for (auto& x : v) x = draw_cn(rng, var);
  return v;
}

// ---------------------------------------------------------------------------
// Instrumentation.
// ---------------------------------------------------------------------------

/// Counts complex multiplications/divisions on decode paths.  Convention:
/// every multiply or divide with at least one runtime-dependent complex
/// operand counts as one; additions, square roots, and products of
/// constellation constants precomputed per trellis branch do not count.
struct MultCounter {
  std::uint64_t count = 0;
  void add(std::uint64_t n) { count += n; }
};

inline void count_mults(MultCounter* c, std::uint64_t n) {
  if (c != nullptr) c->add(n);
}

}  // namespace tpmlse
