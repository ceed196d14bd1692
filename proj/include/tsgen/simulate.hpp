#pragma once

// Ground-truth trajectory generation with reproducible, channel-separable
// noise streams. Process and measurement noises come from independent
// counter-based streams so either can be re-drawn with the other held fixed.

#include <cstdint>
#include <vector>

#include "tsgen/model.hpp"

namespace tsgen {

struct NoiseSeeds {
  std::uint64_t process_seed = 1;
  std::uint64_t measurement_seed = 2;
};

// Stateless counter-based generator: every draw is a pure function of
// (seed, step, channel), so inserting extra draws never shifts other streams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  // Standard normal draw for (step, channel), Box-Muller on two keyed uniforms.
  double gaussian(std::uint64_t step, std::uint64_t channel) const;

  // Uniform in (0,1).
  double uniform(std::uint64_t step, std::uint64_t channel, std::uint64_t idx) const;

 private:
  std::uint64_t seed_;
};

struct Trajectory {
  std::vector<Vector> states;              // x[k], k = 0..T
  std::vector<Vector> measurements;        // y[k], k = 0..T
  std::vector<Vector> process_noises;      // v[k], k = 0..T-1
  std::vector<Vector> measurement_noises;  // w[k], k = 0..T

  int steps() const { return static_cast<int>(states.size()) - 1; }
};

// Zero-mean Gaussian with covariance w; the PSD square-root factor is cached
// so singular covariances (sigma = 0 channels) are handled exactly.
class ProcessNoiseSampler {
 public:
  explicit ProcessNoiseSampler(const Matrix& w);

  Vector sample(const CounterRng& rng, std::uint64_t step) const;

 private:
  Matrix sqrt_w_;
};

Vector sample_process_noise(const CounterRng& rng, std::uint64_t step, const Matrix& w);

Trajectory run_truth(const EnsembleConfig& cfg, const NoiseSeeds& seeds);

// CSV round trip for replay and debugging. Floats are written in shortest
// round-trip form, so a reloaded trajectory drives the algorithms to
// bit-identical outputs.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path);

}  // namespace tsgen
