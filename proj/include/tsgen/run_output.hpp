#pragma once

#include <vector>

#include "tsgen/linalg.hpp"

namespace tsgen {

// Per-step outputs of a time-scale run, k = 0..T.
struct RunOutput {
  std::vector<double> ta;         // averaged atomic time TA[k]
  std::vector<Vector> residuals;  // clock residuals eps_1[k] in R^m
  std::vector<double> trace_p;    // trace of the error covariance (filter runs)
  std::vector<double> max_eig_p;  // largest eigenvalue of P (dense filter runs)
};

}  // namespace tsgen
