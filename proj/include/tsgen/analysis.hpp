#pragma once

// Statistics over runs: overlapping Allan deviation, Monte-Carlo confidence
// bands, and per-clock residual-variance comparison between the algorithms.

#include <span>
#include <vector>

#include "tsgen/linalg.hpp"
#include "tsgen/run_output.hpp"

namespace tsgen {

struct AdevCurve {
  std::vector<double> taus;  // strictly increasing averaging times
  std::vector<double> adev;  // overlapping Allan deviation, one per tau
};

// Overlapping Allan deviation of a phase (time-deviation) series sampled at
// tau0. The default grid is octave-spaced averaging factors while N - 2m >= 1;
// an explicit factor list may be supplied instead (factors that do not fit the
// series are rejected).
AdevCurve overlapping_adev(std::span<const double> phase, double tau0);
AdevCurve overlapping_adev(std::span<const double> phase, double tau0,
                           const std::vector<int>& factors);

struct Band {
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

// Pointwise empirical mean and central quantile band across paths,
// e.g. level = 0.98 keeps [q_0.01, q_0.99].
Band confidence_band(const std::vector<std::vector<double>>& paths, double level);

struct VarianceComparison {
  Vector diff;       // per-clock Var(eps_i^jst) - Var(eps_i^ckf), tail average
  Vector std_error;  // Monte-Carlo standard error of diff
  int window_start;  // first step of the tail window
};

// Across-path residual-variance difference in a tail window. The shared
// ensemble-error term is removed pathwise (both residual vectors carry the
// identical TA[k] component under the equal-weight hypotheses), which keeps
// the estimator variance bounded as the horizon grows.
VarianceComparison residual_variance_compare(const std::vector<RunOutput>& jst_runs,
                                             const std::vector<RunOutput>& ckf_runs,
                                             double tail_fraction = 0.2);

}  // namespace tsgen
