#pragma once

// Runtime scaling harness: times both algorithms over a fixed horizon on
// pre-generated trajectories, so the measurement excludes noise generation.

#include <cstdint>
#include <vector>

namespace tsgen {

struct BenchPoint {
  int m = 0;
  double jst_mean_s = 0.0;
  double ckf_mean_s = 0.0;
  double jst_median_of_means_s = 0.0;
  double ckf_median_of_means_s = 0.0;
};

// One point per ensemble size; `repeats` timed runs each, on second-order
// homogeneous ensembles with a fixed horizon of `steps`.
std::vector<BenchPoint> bench_runtime(const std::vector<int>& m_list, int repeats,
                                      int steps, std::uint64_t seed = 1);

}  // namespace tsgen
