/**
 * Tests for channel estimation: least-squares over the training prefix
 * (checked against an independent Eigen dense solve) and the decision-
 * directed LMS tracker (step size, error contraction, static convergence).
 */

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "tpmlse/channel.hpp"
#include "tpmlse/estimation.hpp"

namespace {

using tpmlse::cplx;
using tpmlse::cvec;
using tpmlse::CMatrix;

tpmlse::FrameFormat RandomFormat(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_p(1, 3);
  std::uniform_int_distribution<int> pick_m(1, 2);
  tpmlse::FrameFormat fmt;
  fmt.P = pick_p(rng);
  fmt.M = pick_m(rng);
  std::uniform_int_distribution<int> pick_t(fmt.P, 6);
  fmt.T = pick_t(rng);
  std::uniform_int_distribution<int> pick_n(fmt.T + 1, 12);
  fmt.N = pick_n(rng);
  std::uniform_int_distribution<int> pick_sym(0, tpmlse::psk_order(fmt.M) - 1);
  fmt.training.clear();
  for (int i = 0; i < fmt.T; ++i) fmt.training.push_back(tpmlse::psk_point(pick_sym(rng), fmt.M));
  fmt.validate();
  return fmt;
}

CMatrix TrainingMatrix(const tpmlse::FrameFormat& fmt) {
  const cvec seq = tpmlse::assemble_sequence(fmt, std::vector<int>(fmt.data_len(), 0));
  return tpmlse::build_matrices(fmt, seq).bp;
}

TEST(Estimation, LsMatchesEigenDenseSolve) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto fmt = RandomFormat(rng);
    const CMatrix bp = TrainingMatrix(fmt);
    const cvec h = tpmlse::draw_block_taps(rng, fmt.P);
    const cvec noise = tpmlse::draw_cn_vector(rng, fmt.T, 0.3);
    cvec y_p = tpmlse::mat_vec(bp, h);
    for (int s = 0; s < fmt.T; ++s) y_p[s] += noise[s];

    const auto est = tpmlse::ls_estimate(bp, y_p);
    ASSERT_TRUE(est.has_value());
    EXPECT_EQ(est->source, tpmlse::EstimateSource::LS);

    Eigen::MatrixXcd bpe(bp.rows, bp.cols);
    for (int r = 0; r < bp.rows; ++r) {
      for (int c = 0; c < bp.cols; ++c) bpe(r, c) = bp.at(r, c);
    }
    Eigen::VectorXcd ye(fmt.T);
    for (int s = 0; s < fmt.T; ++s) ye(s) = y_p[s];
    const Eigen::VectorXcd he =
        (bpe.adjoint() * bpe).ldlt().solve(bpe.adjoint() * ye);
    for (int k = 0; k < fmt.P; ++k) {
      EXPECT_NEAR(est->h[k].real(), he(k).real(), 1e-10);
      EXPECT_NEAR(est->h[k].imag(), he(k).imag(), 1e-10);
    }
  }
}

TEST(Estimation, LsSingleTapClosedForm) {
  // P=1 gives bp^H bp = T, so h_hat = bp^H y / T.
  std::mt19937_64 rng(22);
  tpmlse::FrameFormat fmt;
  fmt.N = 8;
  fmt.T = 4;
  fmt.P = 1;
  fmt.M = 1;
  fmt.training = {cplx(1, 0), cplx(-1, 0), cplx(-1, 0), cplx(1, 0)};
  fmt.validate();
  const CMatrix bp = TrainingMatrix(fmt);
  const cvec y_p = tpmlse::draw_cn_vector(rng, 4, 1.0);

  const auto est = tpmlse::ls_estimate(bp, y_p);
  ASSERT_TRUE(est.has_value());
  const cplx direct = tpmlse::adj_vec(bp, y_p)[0] / 4.0;
  EXPECT_NEAR(est->h[0].real(), direct.real(), 1e-12);
  EXPECT_NEAR(est->h[0].imag(), direct.imag(), 1e-12);
}

TEST(Estimation, LsNoiselessRecoversTapsExactly) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const auto fmt = RandomFormat(rng);
    const CMatrix bp = TrainingMatrix(fmt);
    const cvec h = tpmlse::draw_block_taps(rng, fmt.P);
    const cvec y_p = tpmlse::mat_vec(bp, h);
    const auto est = tpmlse::ls_estimate(bp, y_p);
    ASSERT_TRUE(est.has_value());
    for (int k = 0; k < fmt.P; ++k) {
      EXPECT_NEAR(std::abs(est->h[k] - h[k]), 0.0, 1e-10);
    }
  }
}

TEST(Estimation, LsResidualOrthogonalToTraining) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto fmt = RandomFormat(rng);
    const CMatrix bp = TrainingMatrix(fmt);
    const cvec h = tpmlse::draw_block_taps(rng, fmt.P);
    cvec y_p = tpmlse::mat_vec(bp, h);
    const cvec noise = tpmlse::draw_cn_vector(rng, fmt.T, 0.5);
    for (int s = 0; s < fmt.T; ++s) y_p[s] += noise[s];
    const auto est = tpmlse::ls_estimate(bp, y_p);
    ASSERT_TRUE(est.has_value());
    cvec resid = y_p;
    const cvec fit = tpmlse::mat_vec(bp, est->h);
    for (int s = 0; s < fmt.T; ++s) resid[s] -= fit[s];
    const cvec proj = tpmlse::adj_vec(bp, resid);
    for (int k = 0; k < fmt.P; ++k) EXPECT_NEAR(std::abs(proj[k]), 0.0, 1e-10);
  }
}

TEST(Estimation, LsUnbiasedAndErrorShrinksWithNoise) {
  std::mt19937_64 rng(55);
  tpmlse::FrameFormat fmt;
  fmt.N = 15;
  fmt.T = 5;
  fmt.P = 2;
  fmt.M = 1;
  fmt.training = {cplx(-1, 0), cplx(-1, 0), cplx(-1, 0), cplx(1, 0), cplx(-1, 0)};
  fmt.validate();
  const CMatrix bp = TrainingMatrix(fmt);
  const cvec h = {cplx(0.3, 0.4), cplx(-0.5, 0.1)};
  const cvec clean = tpmlse::mat_vec(bp, h);

  const int n = 20000;
  double mse_prev = -1.0;
  for (const double var : {0.25, 0.05, 0.005}) {
    cplx bias0(0, 0), bias1(0, 0);
    double mse = 0.0;
    for (int i = 0; i < n; ++i) {
      cvec y_p = clean;
      const cvec noise = tpmlse::draw_cn_vector(rng, fmt.T, var);
      for (int s = 0; s < fmt.T; ++s) y_p[s] += noise[s];
      const auto est = tpmlse::ls_estimate(bp, y_p);
      ASSERT_TRUE(est.has_value());
      bias0 += est->h[0] - h[0];
      bias1 += est->h[1] - h[1];
      mse += std::norm(est->h[0] - h[0]) + std::norm(est->h[1] - h[1]);
    }
    EXPECT_LT(std::abs(bias0) / n, 0.01);
    EXPECT_LT(std::abs(bias1) / n, 0.01);
    mse /= n;
    if (mse_prev >= 0.0) {
      EXPECT_LT(mse, mse_prev);
    }
    // Theory: E||h_hat - h||^2 = var * tr(G^{-1}) = var * (1/5 + 1/4).
    EXPECT_NEAR(mse, var * 0.45, var * 0.45 * 0.1);
    mse_prev = mse;
  }
}

TEST(Estimation, LsSingularGramIsFlagged) {
  // A rank-deficient regressor matrix cannot occur with valid unit-modulus
  // training, but the failure path must still report cleanly.
  CMatrix bad(3, 2);
  bad.at(0, 0) = 1.0;
  bad.at(1, 0) = -1.0;
  bad.at(2, 0) = 1.0;  // second column all zero
  const cvec y = {cplx(1, 0), cplx(0, 1), cplx(-1, 0)};
  EXPECT_FALSE(tpmlse::ls_estimate(bad, y).has_value());
}

TEST(Estimation, LmsStepSizeFromFadingRate) {
  EXPECT_NEAR(tpmlse::lms_step_size(0.999), 0.022355088906108007, 1e-15);
  EXPECT_NEAR(tpmlse::lms_step_size(0.99), 0.07053367989832947, 1e-15);
  EXPECT_NEAR(tpmlse::lms_step_size(1.0), 0.0, 1e-15);
  EXPECT_NEAR(tpmlse::lms_step_size(0.0), 0.5, 1e-15);
}

TEST(Estimation, LmsErrorContractsGeometrically) {
  // Repeated updates on one fixed (regressor, sample) pair scale the
  // a-priori error by exactly (1 - mu ||s||^2) per step.
  const cvec s = {cplx(0.0, 1.0), cplx(-1.0, 0.0)};  // ||s||^2 = 2
  const cplx y(0.7, -1.3);
  const double mu = 0.25;  // contraction factor 0.5
  cvec h = {cplx(0.1, 0.2), cplx(-0.4, 0.05)};

  cplx prev_e(0, 0);
  for (int it = 0; it < 40; ++it) {
    const cplx e = tpmlse::lms_update(h, s, y, mu);
    if (it > 0) {
      EXPECT_NEAR(e.real(), 0.5 * prev_e.real(), 1e-12);
      EXPECT_NEAR(e.imag(), 0.5 * prev_e.imag(), 1e-12);
    }
    prev_e = e;
  }
  EXPECT_LT(std::abs(prev_e), 1e-9);
}

TEST(Estimation, LmsTracksStaticChannelNoiseless) {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> bit(0, 1);
  const cvec h_true = {cplx(0.5, -0.3), cplx(0.2, 0.6)};
  cvec h = {cplx(0, 0), cplx(0, 0)};
  cplx b_prev(1.0, 0.0);
  for (int it = 0; it < 500; ++it) {
    const cplx b_new = tpmlse::psk_point(bit(rng), 1);
    const cvec s = {b_new, b_prev};
    const cplx y = s[0] * h_true[0] + s[1] * h_true[1];
    tpmlse::lms_update(h, s, y, 0.1);
    b_prev = b_new;
  }
  EXPECT_LT(std::abs(h[0] - h_true[0]), 1e-3);
  EXPECT_LT(std::abs(h[1] - h_true[1]), 1e-3);
}

}  // namespace
