#include "tsgen/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "tsgen/ckf.hpp"
#include "tsgen/jst.hpp"
#include "tsgen/simulate.hpp"

namespace tsgen {
namespace {

using Clock = std::chrono::steady_clock;

EnsembleConfig bench_config(int m, int steps) {
  EnsembleConfig cfg;
  ClockSpec spec;
  spec.order = 2;
  spec.sigma = {2.0587e-20, 4.0760e-28};
  cfg.clocks.assign(static_cast<std::size_t>(m), spec);
  cfg.weights = Vector::Constant(m, 1.0 / m);
  cfg.tau = {0.1};
  cfg.horizon = steps;
  cfg.w_guess = true_process_cov(cfg, 0.1);
  cfg.r_guess = 1e-12 * Matrix::Identity(m - 1, m - 1);
  cfg.r_true = cfg.r_guess;
  cfg.p0 = 1e-8;
  cfg.x0 = Vector::Constant(2 * m, 1e-15);
  cfg.x0_guess = cfg.x0;
  return cfg;
}

double median_of_means(std::vector<double> samples, int groups) {
  const int per = std::max<int>(1, static_cast<int>(samples.size()) / groups);
  std::vector<double> means;
  for (std::size_t i = 0; i + per <= samples.size(); i += per) {
    double sum = 0.0;
    for (std::size_t j = i; j < i + static_cast<std::size_t>(per); ++j) sum += samples[j];
    means.push_back(sum / per);
  }
  std::sort(means.begin(), means.end());
  return means[means.size() / 2];
}

template <typename Fn>
std::pair<double, double> time_runs(Fn&& fn, int repeats) {
  fn();  // warm-up
  fn();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  return {mean, median_of_means(samples, 10)};
}

}  // namespace

std::vector<BenchPoint> bench_runtime(const std::vector<int>& m_list, int repeats,
                                      int steps, std::uint64_t seed) {
  if (repeats < 1 || steps < 1) {
    throw std::invalid_argument("bench_runtime: repeats and steps must be >= 1");
  }
  for (int m : m_list) {
    if (m < 2 || m > 64) throw std::invalid_argument("bench_runtime: m must be in 2..64");
  }
  std::vector<BenchPoint> out;
  volatile double sink = 0.0;  // keeps the timed runs observable
  for (int m : m_list) {
    const EnsembleConfig cfg = bench_config(m, steps);
    const Trajectory traj = run_truth(cfg, NoiseSeeds{seed, seed + 1});

    BenchPoint point;
    point.m = m;
    const auto [jst_mean, jst_mom] = time_runs(
        [&] {
          const RunOutput run = jst_run(cfg, traj, JstForm::loop);
          sink = sink + run.ta.back();
        },
        repeats);
    point.jst_mean_s = jst_mean;
    point.jst_median_of_means_s = jst_mom;

    CkfOptions opts;
    opts.mode = CkfMode::dense;
    const auto [ckf_mean, ckf_mom] = time_runs(
        [&] {
          const RunOutput run = ckf_run(cfg, traj, opts);
          sink = sink + run.ta.back();
        },
        repeats);
    point.ckf_mean_s = ckf_mean;
    point.ckf_median_of_means_s = ckf_mom;
    out.push_back(point);
  }
  (void)sink;
  return out;
}

}  // namespace tsgen
