#include "tsgen/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsgen {
namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

namespace {

double adev_at(std::span<const double> phase, double tau0, std::size_t m) {
  const std::size_t count = phase.size() - 2 * m;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d2 = phase[i + 2 * m] - 2.0 * phase[i + m] + phase[i];
    sum += d2 * d2;
  }
  const double tau = static_cast<double>(m) * tau0;
  return std::sqrt(sum / (2.0 * tau * tau * static_cast<double>(count)));
}

void check_adev_input(std::span<const double> phase, double tau0) {
  if (phase.size() < 3) {
    throw std::invalid_argument("overlapping_adev: series length must be >= 3");
  }
  if (!(tau0 > 0.0)) throw std::invalid_argument("overlapping_adev: tau0 must be > 0");
}

}  // namespace

AdevCurve overlapping_adev(std::span<const double> phase, double tau0) {
  check_adev_input(phase, tau0);
  AdevCurve curve;
  for (std::size_t m = 1; phase.size() >= 2 * m + 1; m *= 2) {
    curve.taus.push_back(static_cast<double>(m) * tau0);
    curve.adev.push_back(adev_at(phase, tau0, m));
  }
  return curve;
}

AdevCurve overlapping_adev(std::span<const double> phase, double tau0,
                           const std::vector<int>& factors) {
  check_adev_input(phase, tau0);
  AdevCurve curve;
  int prev = 0;
  for (int m : factors) {
    if (m <= prev) {
      throw std::invalid_argument("overlapping_adev: factors must be strictly increasing");
    }
    prev = m;
    if (phase.size() < 2 * static_cast<std::size_t>(m) + 1) {
      throw std::invalid_argument("overlapping_adev: series too short for factor " +
                                  std::to_string(m));
    }
    curve.taus.push_back(static_cast<double>(m) * tau0);
    curve.adev.push_back(adev_at(phase, tau0, static_cast<std::size_t>(m)));
  }
  return curve;
}

Band confidence_band(const std::vector<std::vector<double>>& paths, double level) {
  if (paths.size() < 2) throw std::invalid_argument("confidence_band: need >= 2 paths");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence_band: level must be in (0,1)");
  }
  const std::size_t steps = paths.front().size();
  for (const auto& p : paths) {
    if (p.size() != steps) throw std::invalid_argument("confidence_band: ragged paths");
  }
  const double alpha = (1.0 - level) / 2.0;

  Band band;
  band.mean.resize(steps);
  band.lo.resize(steps);
  band.hi.resize(steps);
  std::vector<double> column(paths.size());
  for (std::size_t k = 0; k < steps; ++k) {
    double sum = 0.0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
      column[p] = paths[p][k];
      sum += column[p];
    }
    band.mean[k] = sum / static_cast<double>(paths.size());
    std::sort(column.begin(), column.end());
    band.lo[k] = quantile_sorted(column, alpha);
    band.hi[k] = quantile_sorted(column, 1.0 - alpha);
  }
  return band;
}

VarianceComparison residual_variance_compare(const std::vector<RunOutput>& jst_runs,
                                             const std::vector<RunOutput>& ckf_runs,
                                             double tail_fraction) {
  const std::size_t paths = jst_runs.size();
  if (paths < 2 || ckf_runs.size() != paths) {
    throw std::invalid_argument("residual_variance_compare: need matching path sets (>= 2)");
  }
  const std::size_t steps = jst_runs.front().ta.size();
  const int m = static_cast<int>(jst_runs.front().residuals.front().size());
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("residual_variance_compare: tail_fraction in (0,1]");
  }
  const std::size_t start =
      static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * (steps - 1))) + 1;

  VarianceComparison out;
  out.window_start = static_cast<int>(start);
  out.diff = Vector::Zero(m);
  out.std_error = Vector::Zero(m);

  std::vector<double> a(paths), b(paths), d(paths);
  const double inv_paths = 1.0 / static_cast<double>(paths);
  for (int i = 0; i < m; ++i) {
    double diff_sum = 0.0;
    double se_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t k = start; k < steps; ++k) {
      double mean_a = 0.0;
      double mean_b = 0.0;
      for (std::size_t p = 0; p < paths; ++p) {
        // The TA component is common to both residual vectors under the
        // equal-weight hypotheses; removing it pathwise keeps the estimator
        // variance flat in k.
        a[p] = jst_runs[p].residuals[k](i) - jst_runs[p].ta[k];
        b[p] = ckf_runs[p].residuals[k](i) - ckf_runs[p].ta[k];
        mean_a += a[p];
        mean_b += b[p];
      }
      mean_a *= inv_paths;
      mean_b *= inv_paths;
      double mean_d = 0.0;
      for (std::size_t p = 0; p < paths; ++p) {
        const double ac = a[p] - mean_a;
        const double bc = b[p] - mean_b;
        d[p] = ac * ac - bc * bc;
        mean_d += d[p];
      }
      mean_d /= static_cast<double>(paths - 1);
      double var_d = 0.0;
      for (std::size_t p = 0; p < paths; ++p) {
        const double c = d[p] * static_cast<double>(paths) /
                             static_cast<double>(paths - 1) - mean_d;
        var_d += c * c;
      }
      var_d /= static_cast<double>(paths - 1);
      diff_sum += mean_d;
      se_sum += std::sqrt(var_d / static_cast<double>(paths));
      ++used;
    }
    out.diff(i) = diff_sum / static_cast<double>(used);
    // Conservative window aggregation: steps treated as fully correlated.
    out.std_error(i) = se_sum / static_cast<double>(used);
  }
  return out;
}

}  // namespace tsgen
