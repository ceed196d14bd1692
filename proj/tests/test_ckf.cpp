#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "tsgen/ckf.hpp"
#include "tsgen/jst.hpp"

using namespace tsgen;
using tsgen::test::make_config;
using tsgen::test::max_abs;
using tsgen::test::max_abs_diff;

TEST_CASE("gain formula on the two-clock first-order system") {
  // H = Vbar = [1, -1], P = I2: K = [1; -1] / (2 + r).
  const double r = 0.5;
  CkfState s;
  s.x_hat = Vector::Zero(2);
  s.p = Matrix::Identity(2, 2);
  const Matrix f = Matrix::Identity(2, 2);
  const Matrix h = diff_matrix(2);
  Vector y(1);
  y << 0.0;
  ckf_step(s, f, h, Matrix::Zero(2, 2), r * Matrix::Identity(1, 1), y);
  CHECK(s.k(0, 0) == doctest::Approx(1.0 / (2.0 + r)).epsilon(1e-12));
  CHECK(s.k(1, 0) == doctest::Approx(-1.0 / (2.0 + r)).epsilon(1e-12));
}

TEST_CASE("huge measurement covariance freezes the update") {
  CkfState s;
  s.x_hat = Vector(2);
  s.x_hat << 1.0, -1.0;
  s.p = Matrix::Identity(2, 2);
  const Matrix f = Matrix::Identity(2, 2);
  const Matrix h = diff_matrix(2);
  Vector y(1);
  y << 100.0;
  ckf_step(s, f, h, Matrix::Zero(2, 2), 1e12 * Matrix::Identity(1, 1), y);
  CHECK(s.k.cwiseAbs().maxCoeff() <= 2e-12);
  CHECK(std::abs(s.x_hat(0) - 1.0) <= 1e-9);   // pure prediction up to the tiny gain
  CHECK(std::abs(s.x_hat(1) + 1.0) <= 1e-9);
}

TEST_CASE("singular innovation covariance is rejected") {
  CkfState s;
  s.x_hat = Vector::Zero(2);
  s.p = Matrix::Zero(2, 2);
  const Matrix f = Matrix::Identity(2, 2);
  const Matrix h = diff_matrix(2);
  Vector y(1);
  y << 0.0;
  CHECK_THROWS_AS(
      ckf_step(s, f, h, Matrix::Zero(2, 2), Matrix::Zero(1, 1), y),
      std::runtime_error);
}

TEST_CASE("gain annihilation under the Kronecker covariance guess") {
  const EnsembleConfig cfg = make_config(2, 4, 0.1, 1000, {1.0, 0.25}, 0.09, 0.1);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{51, 52});
  CkfState s;
  s.x_hat = cfg.x0_guess;
  s.p = cfg.p0 * Matrix::Identity(8, 8);
  const EnsembleMatrices em = ensemble_matrices(cfg, 0);
  const Matrix ones_rows = kron(Matrix::Identity(2, 2), Matrix::Ones(1, 4));
  for (int k = 0; k < cfg.horizon; ++k) {
    ckf_step(s, em.f, em.h, cfg.w_guess, cfg.r_guess,
             traj.measurements[static_cast<std::size_t>(k)]);
    const double gain_scale = std::max(s.k.cwiseAbs().maxCoeff(), 1e-30);
    CHECK((ones_rows * s.k).cwiseAbs().maxCoeff() <= 1e-10 * gain_scale);
  }
}

TEST_CASE("observable filter reproduces the full filter") {
  // Modest p0 and horizon: the dense path's rounding floor grows with the
  // common-mode covariance, which is the divergence under study elsewhere.
  const EnsembleConfig cfg = make_config(2, 3, 0.5, 200, {1.0, 0.25}, 0.04, 1.0);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{61, 62});
  const EnsembleMatrices em = ensemble_matrices(cfg, 0);
  const ObservableSystem obs = observable_decomp(cfg, 0);

  CkfState full;
  full.x_hat = cfg.x0_guess;
  full.p = cfg.p0 * Matrix::Identity(6, 6);
  ObsCkfState small;
  small.xi_hat = obs.to_obs * cfg.x0_guess;
  small.p_hat = cfg.p0 * obs.to_obs * obs.to_obs.transpose();

  for (int k = 0; k < cfg.horizon; ++k) {
    const Vector& y = traj.measurements[static_cast<std::size_t>(k)];
    const Vector innov_full = y - em.h * full.x_hat;
    const Vector innov_obs = y - obs.h_o * small.xi_hat;
    CHECK((innov_full - innov_obs).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(innov_full.cwiseAbs().maxCoeff(), 1e-30));
    ckf_step(full, em.f, em.h, cfg.w_guess, cfg.r_guess, y);
    obs_ckf_step(small, obs.f_o, obs.h_o, obs.w_o, cfg.r_guess, y);
    // K_hat = (I (x) Vbar) K and P_hat = (I (x) Vbar) P (I (x) Vbar)'.
    CHECK((obs.to_obs * full.k - small.k_hat).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(small.k_hat.cwiseAbs().maxCoeff(), 1e-30));
    const Matrix projected = obs.to_obs * full.p * obs.to_obs.transpose();
    CHECK((projected - small.p_hat).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(small.p_hat.cwiseAbs().maxCoeff(), 1e-30));
  }
}

TEST_CASE("observable covariance approaches the scalar fixed point") {
  // n=1, m=2: P converges to (q + sqrt(q^2 + 4 q r)) / 2.
  const double q = 0.7;
  const double r = 2.0;
  ObsCkfState s;
  s.xi_hat = Vector::Zero(1);
  s.p_hat = Matrix::Identity(1, 1);
  const Matrix f = Matrix::Identity(1, 1);
  const Matrix h = Matrix::Identity(1, 1);
  const Matrix w = q * Matrix::Identity(1, 1);
  const Matrix rm = r * Matrix::Identity(1, 1);
  Vector y(1);
  y << 0.0;
  for (int k = 0; k < 200; ++k) obs_ckf_step(s, f, h, w, rm, y);
  const double expected = (q + std::sqrt(q * q + 4.0 * q * r)) / 2.0;
  CHECK(s.p_hat(0, 0) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("zero process noise contracts the observable covariance") {
  ObsCkfState s;
  s.xi_hat = Vector::Zero(2);
  s.p_hat = 3.0 * Matrix::Identity(2, 2);
  const Matrix f = Matrix::Identity(2, 2);
  const Matrix h = Matrix::Identity(2, 2);
  const Matrix w = Matrix::Zero(2, 2);
  const Matrix r = Matrix::Identity(2, 2);
  Vector y = Vector::Zero(2);
  Matrix prev = s.p_hat;
  for (int k = 0; k < 100; ++k) {
    obs_ckf_step(s, f, h, w, r, y);
    CHECK(is_psd(prev - s.p_hat, 1e-12));  // monotone in the PSD order
    prev = s.p_hat;
  }
}

TEST_CASE("dense and decomposed runners agree at friendly scales") {
  EnsembleConfig cfg = make_config(2, 3, 0.5, 400, {1.0, 0.25}, 0.01, 2.0);
  cfg.x0_guess = Vector::Constant(6, 0.3);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{71, 72});
  CkfOptions dense;
  dense.mode = CkfMode::dense;
  const RunOutput a = ckf_run(cfg, traj, dense);
  const RunOutput b = ckf_run(cfg, traj);
  CHECK(max_abs_diff(a.ta, b.ta) <= 1e-10 * std::max(max_abs(a.ta), 1e-30));
  for (int k = 0; k <= cfg.horizon; ++k) {
    CHECK(std::abs(a.trace_p[static_cast<std::size_t>(k)] -
                   b.trace_p[static_cast<std::size_t>(k)]) <=
          1e-9 * std::abs(a.trace_p[static_cast<std::size_t>(k)]));
  }
}

TEST_CASE("perfect start with zero noise tracks exactly") {
  EnsembleConfig cfg = make_config(2, 3, 0.5, 100, {0.0, 0.0}, 0.0, 1.0);
  cfg.x0 = Vector(6);
  cfg.x0 << 1.0, 0.5, 0.25, -0.5, 2.0, 1.0;
  cfg.x0_guess = cfg.x0;
  // r_true = 0 keeps the measurements exact; the guess stays positive so the
  // innovation covariance is invertible.
  cfg.r_guess = 1e-4 * Matrix::Identity(2, 2);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{81, 82});
  const RunOutput out = ckf_run(cfg, traj);
  CHECK(max_abs(out.ta) <= 1e-13);
}

TEST_CASE("common mode projection") {
  const int n = 2;
  const int m = 3;
  SUBCASE("common-mode-free covariance is unchanged") {
    // Build P with zero common row/column in every order block.
    const Matrix vd = pinv_diff(m);
    const Matrix lift = kron(Matrix::Identity(n, n), vd);
    Matrix base = Matrix::Random(n * (m - 1), n * (m - 1));
    base = (base * base.transpose()).eval();
    const Matrix p = lift * base * lift.transpose();
    const Matrix reduced = common_mode_projection(p, n, m);
    CHECK((reduced - p).cwiseAbs().maxCoeff() <= 1e-12 * p.cwiseAbs().maxCoeff());
  }
  SUBCASE("identity loses its common-mode share") {
    const Matrix reduced = common_mode_projection(Matrix::Identity(n * m, n * m), n, m);
    CHECK(reduced.trace() < n * m);
    CHECK(reduced.trace() == doctest::Approx(n * (m - 1.0)));
  }
}

TEST_CASE("reduction keeps the covariance trace bounded") {
  // First-order pair: the plain filter trace grows linearly with k.
  const EnsembleConfig cfg = make_config(1, 2, 1.0, 20000, {1.0}, 0.5, 1.0);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{91, 92});
  CkfOptions plain;
  plain.mode = CkfMode::dense;
  const RunOutput no_fix = ckf_run(cfg, traj, plain);
  CkfOptions fixed = plain;
  fixed.reduction = make_common_mode_reduction(1, 2);
  const RunOutput with_fix = ckf_run(cfg, traj, fixed);

  const double early = no_fix.trace_p[2000];
  const double late = no_fix.trace_p[20000];
  CHECK(late > early + 0.4 * (18000.0 / 2.0) * 0.9);  // ~ k q / m growth
  CHECK(with_fix.trace_p[20000] < with_fix.trace_p[2000] * 1.01);
  CHECK(with_fix.trace_p[20000] < 10.0);
}

TEST_CASE("reduction hook requires the dense mode") {
  const EnsembleConfig cfg = make_config(1, 2, 1.0, 10, {1.0}, 0.5);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{1, 2});
  CkfOptions opts;
  opts.reduction = make_common_mode_reduction(1, 2);
  CHECK_THROWS_AS(ckf_run(cfg, traj, opts), std::invalid_argument);
}

TEST_CASE("Joseph form agrees with the plain update for the computed gain") {
  const EnsembleConfig cfg = make_config(2, 3, 0.5, 150, {1.0, 0.25}, 0.04, 1.0);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{131, 132});
  const EnsembleMatrices em = ensemble_matrices(cfg, 0);
  CkfState plain, joseph;
  plain.x_hat = joseph.x_hat = cfg.x0_guess;
  plain.p = joseph.p = cfg.p0 * Matrix::Identity(6, 6);
  for (int k = 0; k < cfg.horizon; ++k) {
    const Vector& y = traj.measurements[static_cast<std::size_t>(k)];
    ckf_step(plain, em.f, em.h, cfg.w_guess, cfg.r_guess, y, false);
    ckf_step(joseph, em.f, em.h, cfg.w_guess, cfg.r_guess, y, true);
    CHECK((plain.p - joseph.p).cwiseAbs().maxCoeff() <=
          1e-11 * plain.p.cwiseAbs().maxCoeff());
    CHECK((plain.x_hat - joseph.x_hat).cwiseAbs().maxCoeff() <=
          1e-11 * std::max(plain.x_hat.cwiseAbs().maxCoeff(), 1e-30));
  }
}

TEST_CASE("plain covariance update is symmetric to rounding") {
  const EnsembleConfig cfg = make_config(2, 3, 0.5, 100, {1.0, 0.25}, 0.04, 1.0);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{141, 142});
  const EnsembleMatrices em = ensemble_matrices(cfg, 0);
  CkfState s;
  s.x_hat = cfg.x0_guess;
  s.p = cfg.p0 * Matrix::Identity(6, 6);
  for (int k = 0; k < cfg.horizon; ++k) {
    // Recompute the raw update of the stored (symmetric) P and measure the
    // asymmetry the production step removes.
    const Matrix pht = s.p * em.h.transpose();
    const Matrix smat = em.h * pht + cfg.r_guess;
    const Matrix kk = smat.ldlt().solve(pht.transpose()).transpose();
    const Matrix raw = em.f * (s.p - kk * em.h * s.p) * em.f.transpose() + cfg.w_guess;
    const double asym = (raw - raw.transpose()).cwiseAbs().maxCoeff();
    CHECK(asym <= 1e-13 * raw.cwiseAbs().maxCoeff());
    ckf_step(s, em.f, em.h, cfg.w_guess, cfg.r_guess,
             traj.measurements[static_cast<std::size_t>(k)]);
    CHECK(s.p.isApprox(s.p.transpose()));
  }
}

TEST_CASE("equal weights match the weighting algorithm, unequal do not") {
  EnsembleConfig cfg = make_config(2, 4, 0.5, 800, {1.0, 0.25}, 0.04, 3.0);
  cfg.x0_guess = Vector::Constant(8, 0.2);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{101, 102});
  const RunOutput jst = jst_run(cfg, traj);
  const RunOutput ckf = ckf_run(cfg, traj);
  CHECK(max_abs_diff(jst.ta, ckf.ta) <= 1e-10 * max_abs(jst.ta));

  EnsembleConfig uneq = cfg;
  uneq.weights = Vector(4);
  uneq.weights << 0.4, 0.3, 0.2, 0.1;
  const RunOutput jst_u = jst_run(uneq, traj);
  const RunOutput ckf_u = ckf_run(uneq, traj);
  CHECK(max_abs_diff(jst_u.ta, ckf_u.ta) > 1e-3 * max_abs(jst_u.ta));
}

TEST_CASE("equivalence is insensitive to the measurement covariance guess") {
  // Only the Kronecker structure of w_guess and the scalar initial covariance
  // matter; a wrong r_guess must not break the equal-weight agreement.
  EnsembleConfig cfg = make_config(2, 3, 0.5, 600, {1.0, 0.25}, 0.04, 3.0);
  cfg.x0_guess = Vector::Constant(6, 0.2);
  cfg.r_guess = 0.7 * Matrix::Identity(2, 2);  // != r_true
  const Trajectory traj = run_truth(cfg, NoiseSeeds{111, 112});
  const RunOutput jst = jst_run(cfg, traj);
  const RunOutput ckf = ckf_run(cfg, traj);
  CHECK(max_abs_diff(jst.ta, ckf.ta) <= 1e-10 * max_abs(jst.ta));
}
