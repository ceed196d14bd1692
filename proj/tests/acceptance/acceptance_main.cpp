// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Every tolerance is pinned here.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tsgen/analysis.hpp"
#include "tsgen/bench.hpp"
#include "tsgen/ckf.hpp"
#include "tsgen/jst.hpp"
#include "tsgen/simulate.hpp"
#include "tsgen/theory.hpp"

using namespace tsgen;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs(const std::vector<double>& v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, std::abs(x));
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

EnsembleConfig homogeneous_config(int n, int m, double tau, int horizon,
                                  std::vector<double> sigma, double r, double p0) {
  EnsembleConfig cfg;
  ClockSpec spec;
  spec.order = n;
  spec.sigma = std::move(sigma);
  cfg.clocks.assign(static_cast<std::size_t>(m), spec);
  cfg.weights = Vector::Constant(m, 1.0 / m);
  cfg.tau = {tau};
  cfg.horizon = horizon;
  cfg.w_guess = true_process_cov(cfg, tau);
  cfg.r_true = r * Matrix::Identity(m - 1, m - 1);
  cfg.r_guess = cfg.r_true;
  cfg.p0 = p0;
  cfg.x0 = Vector::Zero(n * m);
  cfg.x0_guess = cfg.x0;
  return cfg;
}

EnsembleConfig example1_config() {
  EnsembleConfig cfg =
      homogeneous_config(2, 5, 0.1, 36000, {2.0587e-20, 4.0760e-28}, 1e-12, 1e-8);
  cfg.x0 = Vector(10);
  cfg.x0 << 1.05e-15, 1.15e-15, 1.25e-15, 1.35e-15, 1.45e-15, 1.55e-15, 1.65e-15,
      1.75e-15, 1.85e-15, 1.95e-15;
  cfg.x0_guess = Vector::Constant(10, 1e-15);
  return cfg;
}

EnsembleConfig example2_config(double r, int horizon) {
  EnsembleConfig cfg =
      homogeneous_config(3, 3, 1.0, horizon, {9e-26, 7.5e-34, 1e-47}, r, 1e-13);
  cfg.x0 = Vector::Constant(9, 1e-28);
  cfg.x0_guess = cfg.x0;
  return cfg;
}

// Parallel Monte-Carlo map: fn(path) for path = 0..paths-1.
void parallel_paths(int paths, const std::function<void(int)>& fn) {
  const unsigned workers = std::max(
      1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(paths)));
  std::atomic<int> next{0};
  std::vector<std::future<void>> tasks;
  for (unsigned t = 0; t < workers; ++t) {
    tasks.push_back(std::async(std::launch::async, [&] {
      for (int p = next.fetch_add(1); p < paths; p = next.fetch_add(1)) fn(p);
    }));
  }
  for (auto& task : tasks) task.get();
}

// ---------------------------------------------------------------------------
// 1. Observation-noise independence of the weighting algorithm's TA.
void criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::mt19937_64 gen(20231);
  std::uniform_real_distribution<double> dist(-0.4, 1.2);
  for (int n : {1, 2, 3}) {
    for (int m : {2, 3, 5}) {
      std::vector<double> sigma;
      for (int i = 0; i < n; ++i) sigma.push_back(1e-18 * std::pow(1e-2, i));
      EnsembleConfig cfg = homogeneous_config(n, m, 1.0, 10000, sigma, 1e-20, 1e-8);
      Vector beta(m);
      for (int i = 0; i < m - 1; ++i) beta(i) = dist(gen);
      beta(m - 1) = 1.0 - beta.head(m - 1).sum();
      cfg.weights = beta;
      cfg.x0 = Vector::Constant(n * m, 1e-9);
      cfg.x0_guess = Vector::Constant(n * m, 9e-10);

      const Trajectory ta = run_truth(cfg, NoiseSeeds{101, 500});
      const Trajectory tb = run_truth(cfg, NoiseSeeds{101, 777});
      const RunOutput ra = jst_run(cfg, ta);
      const RunOutput rb = jst_run(cfg, tb);
      // The comparison is vacuous unless the two noise draws actually differ.
      double w_gap = 0.0;
      for (std::size_t k = 0; k < ta.measurement_noises.size(); ++k) {
        w_gap = std::max(w_gap, (ta.measurement_noises[k] - tb.measurement_noises[k])
                                    .cwiseAbs()
                                    .maxCoeff());
      }
      if (w_gap <= 0.0) worst = 1.0;
      worst = std::max(worst, max_abs_diff(ra.ta, rb.ta) / max_abs(ra.ta));
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst <= 1e-12 && elapsed < 10.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max relative TA change under new measurement noise = %.3e "
                "(tol 1e-12), runtime %.2f s (limit 10)",
                worst, elapsed);
  report(1, pass, buf);
}

// ---------------------------------------------------------------------------
// 2. Equal weights give identical TA; unequal weights do not.
void criterion2() {
  const auto t0 = Clock::now();
  EnsembleConfig cfg = example1_config();
  // The absolute TA gap between the two implementations sits at the rounding
  // walk of the weighting algorithm's measurement-scale state (~2.5e-19 over
  // this horizon); the documented seed keeps max|TA| comfortably above it.
  const Trajectory traj = run_truth(cfg, NoiseSeeds{1234, 1235});

  const RunOutput jst_eq = jst_run(cfg, traj);
  const RunOutput ckf_eq = ckf_run(cfg, traj);
  const double ta_scale = max_abs(jst_eq.ta);
  const double rel_eq = max_abs_diff(jst_eq.ta, ckf_eq.ta) / ta_scale;

  EnsembleConfig uneq = cfg;
  uneq.weights = Vector(5);
  uneq.weights << 0.250, 0.375, 0.125, 0.125, 0.125;
  const RunOutput jst_ne = jst_run(uneq, traj);
  const RunOutput ckf_ne = ckf_run(uneq, traj);
  const double rel_ne = max_abs_diff(jst_ne.ta, ckf_ne.ta) / max_abs(jst_ne.ta);

  const double elapsed = seconds_since(t0);
  const bool pass = rel_eq <= 1e-10 && rel_ne > 1e-3 && elapsed < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "equal-weight rel diff %.3e (tol 1e-10), unequal %.3e (must exceed "
                "1e-3), runtime %.1f s (limit 60)",
                rel_eq, rel_ne, elapsed);
  report(2, pass, buf);
}

// ---------------------------------------------------------------------------
// 3. Residual decompositions track the simulated residuals step by step.
void criterion3() {
  EnsembleConfig cfg = example2_config(1e-12, 1000);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{314, 159});
  const ResidualTheory theory = residual_theory(cfg, traj);
  const RunOutput jst = jst_run(cfg, traj);
  const RunOutput ckf = ckf_run(cfg, traj);

  double scale_j = 0.0;
  double scale_c = 0.0;
  for (std::size_t k = 0; k < jst.residuals.size(); ++k) {
    scale_j = std::max(scale_j, jst.residuals[k].cwiseAbs().maxCoeff());
    scale_c = std::max(scale_c, ckf.residuals[k].cwiseAbs().maxCoeff());
  }
  double worst_j = 0.0;
  double worst_c = 0.0;
  for (std::size_t k = 1; k < jst.residuals.size(); ++k) {
    worst_j = std::max(worst_j,
                       (theory.eps1_jst[k] - jst.residuals[k]).cwiseAbs().maxCoeff());
    worst_c = std::max(worst_c,
                       (theory.eps1_ckf[k] - ckf.residuals[k]).cwiseAbs().maxCoeff());
  }
  worst_j /= scale_j;
  worst_c /= scale_c;
  const bool pass = worst_j <= 1e-11 && worst_c <= 1e-11;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "per-step relative error: weighting %.3e, filter %.3e (tol 1e-11)",
                worst_j, worst_c);
  report(3, pass, buf);
}

// ---------------------------------------------------------------------------
// 4. Per-clock variance criterion reproduces the published values.
void criterion4() {
  const auto t0 = Clock::now();
  const EnsembleConfig large = example2_config(1e-12, 10);
  const LiResult li_large = li_criterion(large, large.r_true);
  const EnsembleConfig small = example2_config(1e-27, 10);
  const LiResult li_small = li_criterion(small, small.r_true);
  const double riccati_s = seconds_since(t0);

  auto close = [](double value, double target) {
    return std::abs(value - target) <= 0.01 * std::abs(target);
  };
  const bool pass_large = close(li_large.li(0), 5.56e-13) &&
                          close(li_large.li(1), 5.56e-13) &&
                          close(li_large.li(2), 2.22e-13);
  const bool pass_small = close(li_small.li(0), -6.0000e-26) &&
                          close(li_small.li(1), -6.0000e-26) &&
                          close(li_small.li(2), -6.0005e-26);
  const bool pass = pass_large && pass_small && riccati_s < 10.0;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "large noise L = (%.4e, %.4e, %.4e) vs (5.56e-13, 5.56e-13, 2.22e-13); "
                "small noise L = (%.5e, %.5e, %.5e) vs (-6.0000e-26, -6.0000e-26, "
                "-6.0005e-26); +/-1%%, solve %.2f s (limit 10)",
                li_large.li(0), li_large.li(1), li_large.li(2), li_small.li(0),
                li_small.li(1), li_small.li(2), riccati_s);
  report(4, pass, buf);
}

// ---------------------------------------------------------------------------
// 5. Closed-form TA moments against Monte-Carlo, with the 1/m variance law.
void criterion5() {
  const int paths = 2000;
  const int horizon = 2000;
  const int at = horizon;
  bool pass = true;
  std::string detail;
  for (int m : {2, 5, 10}) {
    EnsembleConfig cfg =
        homogeneous_config(2, m, 0.1, horizon, {2.0587e-20, 4.0760e-28}, 0.0, 1e-8);
    Vector mu0(2);
    mu0 << 0.0, 1e-11;  // drift makes the mean check informative
    cfg.x0 = Vector::Zero(2 * m);
    cfg.x0_guess = cfg.x0;
    cfg.x0_guess.segment(0, m).array() -= mu0(0);
    cfg.x0_guess.segment(m, m).array() -= mu0(1);

    std::vector<double> ta_at(static_cast<std::size_t>(paths));
    parallel_paths(paths, [&](int p) {
      const NoiseSeeds seeds{9000 + 2ULL * static_cast<std::uint64_t>(p),
                             9001 + 2ULL * static_cast<std::uint64_t>(p)};
      const Trajectory traj = run_truth(cfg, seeds);
      const RunOutput run = jst_run(cfg, traj);
      ta_at[static_cast<std::size_t>(p)] = run.ta[static_cast<std::size_t>(at)];
    });

    double mean = 0.0;
    for (double v : ta_at) mean += v;
    mean /= paths;
    double var = 0.0;
    for (double v : ta_at) var += (v - mean) * (v - mean);
    var /= (paths - 1);

    const TaMoments mom = ta_moments(cfg, mu0, Matrix(), at);
    const double mean_tol = 3.0 * std::sqrt(mom.variance / paths);
    const double var_tol = 3.0 * mom.variance * std::sqrt(2.0 / (paths - 1));
    const bool mean_ok = std::abs(mean - mom.mean) <= mean_tol;
    const bool var_ok = std::abs(var - mom.variance) <= var_tol;
    pass = pass && mean_ok && var_ok;
    char buf[160];
    std::snprintf(buf, sizeof(buf), " m=%d mean %.3e vs %.3e (3sig %.1e) var %.3e vs %.3e;",
                  m, mean, mom.mean, mean_tol, var, mom.variance);
    detail += buf;
  }
  report(5, pass, "TA moments within 3-sigma, variance scaling 1/m:" + detail);
}

// ---------------------------------------------------------------------------
// 6. Tail-window residual-variance difference matches L1 in both regimes.
void criterion6() {
  bool pass = true;
  std::string detail;
  for (double r : {1e-12, 1e-27}) {
    const int paths = 2000;
    const int horizon = 400;
    EnsembleConfig cfg = example2_config(r, horizon);
    std::vector<RunOutput> jst_runs(static_cast<std::size_t>(paths));
    std::vector<RunOutput> ckf_runs(static_cast<std::size_t>(paths));
    parallel_paths(paths, [&](int p) {
      const NoiseSeeds seeds{40960 + 2ULL * static_cast<std::uint64_t>(p),
                             40961 + 2ULL * static_cast<std::uint64_t>(p)};
      const Trajectory traj = run_truth(cfg, seeds);
      jst_runs[static_cast<std::size_t>(p)] = jst_run(cfg, traj);
      ckf_runs[static_cast<std::size_t>(p)] = ckf_run(cfg, traj);
    });
    const VarianceComparison cmp = residual_variance_compare(jst_runs, ckf_runs, 0.2);
    const LiResult li = li_criterion(cfg, cfg.r_true);
    const bool covered = std::abs(cmp.diff(0) - li.li(0)) <= 3.0 * cmp.std_error(0);
    bool signs = true;
    for (int i = 0; i < 3; ++i) {
      signs = signs && (cmp.diff(i) > 0) == (li.li(i) > 0);
    }
    pass = pass && covered && signs;
    char buf[180];
    std::snprintf(buf, sizeof(buf), " r=%.0e: D1 %.4e vs L1 %.4e (3se %.1e, signs %s);",
                  r, cmp.diff(0), li.li(0), 3.0 * cmp.std_error(0),
                  signs ? "ok" : "WRONG");
    detail += buf;
  }
  report(6, pass, "empirical variance difference vs L:" + detail);
}

// ---------------------------------------------------------------------------
// 7. Allan deviation estimator properties.
void criterion7() {
  // White-FM clock: phase of one clock from a sigma1-only pair.
  EnsembleConfig cfg = homogeneous_config(1, 2, 1.0, 1 << 16, {4e-20}, 0.0, 1e-8);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{7, 8});
  std::vector<double> phase(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) phase[k] = traj.states[k](0);
  const AdevCurve curve = overlapping_adev(phase, 1.0);

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < curve.taus.size() && curve.taus[i] <= 128.0; ++i) {
    const double lx = std::log(curve.taus[i]);
    const double ly = std::log(curve.adev[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);

  std::vector<double> constant(5000, 7.5e-9);
  std::vector<double> ramp(5000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 1e-13 * static_cast<double>(i);
  const double adev_const = max_abs(overlapping_adev(constant, 1.0).adev);
  const double adev_ramp = max_abs(overlapping_adev(ramp, 1.0).adev);

  const bool pass =
      std::abs(slope + 0.5) <= 0.05 && adev_const == 0.0 && adev_ramp <= 1e-22;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "white-FM slope %.4f (target -0.5 +/- 0.05), constant %.1e, ramp %.1e",
                slope, adev_const, adev_ramp);
  report(7, pass, buf);
}

// ---------------------------------------------------------------------------
// 8. Runtime scaling: near-flat weighting algorithm, growing filter cost.
void criterion8() {
  const std::vector<int> sizes{2, 4, 8, 16, 20};
  const std::vector<BenchPoint> points = bench_runtime(sizes, 120, 500, 1);
  double jst_m2 = 0.0;
  double jst_m20 = 0.0;
  bool ckf_monotone = true;
  double prev = 0.0;
  std::string detail;
  for (const BenchPoint& p : points) {
    if (p.m == 2) jst_m2 = p.jst_mean_s;
    if (p.m == 20) jst_m20 = p.jst_mean_s;
    if (p.ckf_mean_s <= prev) ckf_monotone = false;
    prev = p.ckf_mean_s;
    char buf[96];
    std::snprintf(buf, sizeof(buf), " m=%d jst %.2e ckf %.2e;", p.m, p.jst_mean_s,
                  p.ckf_mean_s);
    detail += buf;
  }
  const double ratio = jst_m20 / jst_m2;
  const bool pass = ratio < 3.0 && ckf_monotone;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "jst m20/m2 ratio %.2f (limit 3), ckf monotone %s:",
                ratio, ckf_monotone ? "yes" : "NO");
  report(8, pass, buf + detail);
}

// ---------------------------------------------------------------------------
// 9. Cross-route equivalences.
void criterion9() {
  // Loop vs closed-form weighting algorithm.
  EnsembleConfig cfg = homogeneous_config(3, 4, 0.7, 1000, {1.0, 0.5, 0.25}, 0.01, 1.0);
  Vector beta(4);
  beta << 0.4, 0.3, 0.2, 0.1;
  cfg.weights = beta;
  cfg.x0_guess = Vector::Constant(12, -0.2);
  const Trajectory traj = run_truth(cfg, NoiseSeeds{11, 12});
  const RunOutput loop = jst_run(cfg, traj, JstForm::loop);
  const RunOutput matrix = jst_run(cfg, traj, JstForm::matrix);
  const double rel_forms = max_abs_diff(loop.ta, matrix.ta) / max_abs(loop.ta);

  // Dense vs observable filter innovations.
  EnsembleConfig fcfg = homogeneous_config(2, 3, 0.5, 300, {1.0, 0.25}, 0.04, 1.0);
  fcfg.x0_guess = Vector::Constant(6, 0.1);
  const Trajectory ftraj = run_truth(fcfg, NoiseSeeds{21, 22});
  const EnsembleMatrices em = ensemble_matrices(fcfg, 0);
  const ObservableSystem obs = observable_decomp(fcfg, 0);
  CkfState full;
  full.x_hat = fcfg.x0_guess;
  full.p = fcfg.p0 * Matrix::Identity(6, 6);
  ObsCkfState small;
  small.xi_hat = obs.to_obs * fcfg.x0_guess;
  small.p_hat = fcfg.p0 * obs.to_obs * obs.to_obs.transpose();
  double innov_rel = 0.0;
  double innov_scale = 0.0;
  for (int k = 0; k < fcfg.horizon; ++k) {
    const Vector& y = ftraj.measurements[static_cast<std::size_t>(k)];
    const Vector a = y - em.h * full.x_hat;
    const Vector b = y - obs.h_o * small.xi_hat;
    innov_rel = std::max(innov_rel, (a - b).cwiseAbs().maxCoeff());
    innov_scale = std::max(innov_scale, a.cwiseAbs().maxCoeff());
    ckf_step(full, em.f, em.h, fcfg.w_guess, fcfg.r_guess, y);
    obs_ckf_step(small, obs.f_o, obs.h_o, obs.w_o, fcfg.r_guess, y);
  }
  innov_rel /= innov_scale;

  // Riccati fixed-point residuals at the published scales.
  const EnsembleConfig e2 = example2_config(1e-12, 10);
  const ObservableSystem obs2 = observable_decomp(e2, 0);
  const Matrix p_ss = riccati_steady_state(obs2.f_o, obs2.h_o, obs2.w_o, e2.r_guess);
  const double res_large =
      riccati_residual(p_ss, obs2.f_o, obs2.h_o, obs2.w_o, e2.r_guess);
  const EnsembleConfig e2s = example2_config(1e-27, 10);
  const ObservableSystem obs2s = observable_decomp(e2s, 0);
  const Matrix p_ss_s =
      riccati_steady_state(obs2s.f_o, obs2s.h_o, obs2s.w_o, e2s.r_guess);
  const double res_small =
      riccati_residual(p_ss_s, obs2s.f_o, obs2s.h_o, obs2s.w_o, e2s.r_guess);

  const Matrix one = Matrix::Identity(1, 1);
  const Matrix scalar = riccati_steady_state(one, one, one, one);
  const double golden_err = std::abs(scalar(0, 0) - (1.0 + std::sqrt(5.0)) / 2.0);

  const bool pass = rel_forms <= 1e-12 && innov_rel <= 1e-10 && res_large <= 1e-9 &&
                    res_small <= 1e-9 && golden_err <= 1e-9;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "loop-vs-matrix %.2e (tol 1e-12); innovations %.2e (tol 1e-10); "
                "riccati residuals %.1e / %.1e (tol 1e-9); golden-ratio error %.1e",
                rel_forms, innov_rel, res_large, res_small, golden_err);
  report(9, pass, buf);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  std::printf("acceptance: %s (%d failures, %.1f s total)\n",
              g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures,
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
