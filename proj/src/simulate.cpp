#include "tsgen/simulate.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "tsgen/csv.hpp"

namespace tsgen {
namespace {

// SplitMix64 finalizer; applied per key component so draws are pure
// functions of (seed, step, channel, idx).
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t key_hash(std::uint64_t seed, std::uint64_t step, std::uint64_t channel,
                       std::uint64_t idx) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ step);
  h = mix64(h ^ channel);
  h = mix64(h ^ idx);
  return h;
}

}  // namespace

double CounterRng::uniform(std::uint64_t step, std::uint64_t channel,
                           std::uint64_t idx) const {
  const std::uint64_t h = key_hash(seed_, step, channel, idx);
  // 53 significant bits, offset keeps the value strictly inside (0,1).
  return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

double CounterRng::gaussian(std::uint64_t step, std::uint64_t channel) const {
  const double u1 = uniform(step, channel, 0);
  const double u2 = uniform(step, channel, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ProcessNoiseSampler::ProcessNoiseSampler(const Matrix& w) : sqrt_w_(symmetric_sqrt(w)) {}

Vector ProcessNoiseSampler::sample(const CounterRng& rng, std::uint64_t step) const {
  Vector z(sqrt_w_.rows());
  for (Index i = 0; i < z.size(); ++i) {
    z(i) = rng.gaussian(step, static_cast<std::uint64_t>(i));
  }
  return sqrt_w_ * z;
}

Vector sample_process_noise(const CounterRng& rng, std::uint64_t step, const Matrix& w) {
  return ProcessNoiseSampler(w).sample(rng, step);
}

Trajectory run_truth(const EnsembleConfig& cfg, const NoiseSeeds& seeds) {
  cfg.validate();
  const int n = cfg.order();
  const int m = cfg.size();
  const int steps = cfg.horizon;
  const CounterRng process_rng(seeds.process_seed);
  const CounterRng measurement_rng(seeds.measurement_seed);

  Matrix c = Matrix::Zero(1, n);
  c(0, 0) = 1.0;
  const Matrix h = kron(c, diff_matrix(m));
  const ProcessNoiseSampler measurement_sampler(cfg.r_true);

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.measurements.reserve(static_cast<std::size_t>(steps) + 1);
  traj.process_noises.reserve(static_cast<std::size_t>(steps));
  traj.measurement_noises.reserve(static_cast<std::size_t>(steps) + 1);

  // Process-noise factor per distinct tau; recomputed only when tau changes.
  double cached_tau = cfg.tau_at(0);
  ProcessNoiseSampler process_sampler(true_process_cov(cfg, cached_tau));
  Matrix a_tau = transition_matrix(n, cached_tau);

  Vector x = cfg.x0;
  for (int k = 0; k <= steps; ++k) {
    traj.states.push_back(x);
    Vector w_k = measurement_sampler.sample(measurement_rng, static_cast<std::uint64_t>(k));
    traj.measurement_noises.push_back(w_k);
    traj.measurements.push_back(h * x + w_k);
    if (k == steps) break;

    const double tau_k = cfg.tau_at(k);
    if (tau_k != cached_tau) {
      cached_tau = tau_k;
      process_sampler = ProcessNoiseSampler(true_process_cov(cfg, tau_k));
      a_tau = transition_matrix(n, tau_k);
    }
    const Vector v_k = process_sampler.sample(process_rng, static_cast<std::uint64_t>(k));
    traj.process_noises.push_back(v_k);

    // x <- (A (x) I_m) x + v, applied blockwise on the order-major layout.
    Vector next = v_k;
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        next.segment(a * m, m) += a_tau(a, b) * x.segment(b * m, m);
      }
    }
    x = next;
  }
  return traj;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  const int nm = static_cast<int>(traj.states.front().size());
  const int my = static_cast<int>(traj.measurements.front().size());
  std::vector<std::string> header{"k"};
  for (int i = 1; i <= nm; ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= my; ++i) header.push_back("y_" + std::to_string(i));
  for (int i = 1; i <= nm; ++i) header.push_back("v_" + std::to_string(i));
  for (int i = 1; i <= my; ++i) header.push_back("w_" + std::to_string(i));
  CsvWriter csv(path, header);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (int i = 0; i < nm; ++i) row.push_back(format_double(traj.states[k](i)));
    for (int i = 0; i < my; ++i) row.push_back(format_double(traj.measurements[k](i)));
    // v[k] exists for k < T only.
    for (int i = 0; i < nm; ++i) {
      row.push_back(k < traj.process_noises.size()
                        ? format_double(traj.process_noises[k](i))
                        : "");
    }
    for (int i = 0; i < my; ++i) {
      row.push_back(format_double(traj.measurement_noises[k](i)));
    }
    csv.write_row(row);
  }
}

Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty trajectory file: " + path);
  }
  int nm = 0;
  int my = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell.starts_with("x_")) ++nm;
      if (cell.starts_with("y_")) ++my;
    }
  }
  if (nm < 1 || my < 1) {
    throw std::runtime_error("trajectory file lacks state or measurement columns");
  }

  auto parse = [&](const std::string& cell) {
    double value = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
      throw std::runtime_error("bad numeric cell in trajectory file: '" + cell + "'");
    }
    return value;
  };

  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    // A trailing empty v-cell is dropped by getline when w is empty too;
    // enforce the expected width instead of guessing.
    const std::size_t want = 1 + 2 * static_cast<std::size_t>(nm + my);
    cells.resize(want);
    Vector x(nm), y(my), v(nm), w(my);
    std::size_t at = 1;
    for (int i = 0; i < nm; ++i) x(i) = parse(cells[at++]);
    for (int i = 0; i < my; ++i) y(i) = parse(cells[at++]);
    bool has_v = true;
    for (int i = 0; i < nm; ++i) {
      if (cells[at].empty()) {
        has_v = false;
        ++at;
      } else {
        v(i) = parse(cells[at++]);
      }
    }
    for (int i = 0; i < my; ++i) w(i) = parse(cells[at++]);
    traj.states.push_back(std::move(x));
    traj.measurements.push_back(std::move(y));
    if (has_v) traj.process_noises.push_back(std::move(v));
    traj.measurement_noises.push_back(std::move(w));
  }
  if (traj.states.empty()) throw std::runtime_error("trajectory file has no rows");
  return traj;
}

}  // namespace tsgen
