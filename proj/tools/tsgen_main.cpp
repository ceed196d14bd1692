// Command-line front end: run ensembles, compare the two time-scale
// algorithms, export theory values and runtime benchmarks as CSV.
//
// Algorithm selection maps to implementations as follows: "ckf" is the
// conventional full-state filter (dense recursion, subject to the common-mode
// numerical divergence, optional covariance reduction); "obs-ckf" and the
// filter half of "both" use the exact block-decomposed form, which computes
// the same mathematical sequence at every scale.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tsgen/analysis.hpp"
#include "tsgen/bench.hpp"
#include "tsgen/ckf.hpp"
#include "tsgen/config.hpp"
#include "tsgen/csv.hpp"
#include "tsgen/jst.hpp"
#include "tsgen/simulate.hpp"
#include "tsgen/theory.hpp"

namespace fs = std::filesystem;
using namespace tsgen;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "process seed (measurement seed = seed + 1)");
  cmd->add_option("--paths", flags.paths, "Monte-Carlo path count override");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

ExperimentConfig load(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config_file(flags.config_path);
  if (flags.seed) {
    cfg.seeds.process_seed = *flags.seed;
    cfg.seeds.measurement_seed = *flags.seed + 1;
  }
  if (flags.paths) cfg.paths = *flags.paths;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (cfg.paths < 1) throw std::invalid_argument("paths must be >= 1");
  return cfg;
}

NoiseSeeds path_seeds(const ExperimentConfig& cfg, int path) {
  // Distinct keys per path; the counter generator hashes them apart.
  return NoiseSeeds{cfg.seeds.process_seed + 2ULL * static_cast<std::uint64_t>(path),
                    cfg.seeds.measurement_seed + 2ULL * static_cast<std::uint64_t>(path)};
}

bool wants_jst(Algorithm a) { return a == Algorithm::jst || a == Algorithm::both; }
bool wants_filter(Algorithm a) { return a != Algorithm::jst; }

CkfOptions filter_options(const ExperimentConfig& cfg, bool track_max_eig) {
  CkfOptions opts;
  opts.track_max_eig = track_max_eig;
  if (cfg.reduction == "common-mode-projection") {
    opts.mode = CkfMode::dense;
    opts.reduction =
        make_common_mode_reduction(cfg.ensemble.order(), cfg.ensemble.size());
  } else if (cfg.algorithm == Algorithm::ckf) {
    opts.mode = CkfMode::dense;
  } else {
    opts.mode = CkfMode::decomposed;
  }
  return opts;
}

struct PathResult {
  Trajectory traj;
  std::optional<RunOutput> jst;
  std::optional<RunOutput> ckf;
  std::vector<double> ta_theory;
};

PathResult run_path(const ExperimentConfig& cfg, int path, bool track_max_eig) {
  PathResult out;
  out.traj = run_truth(cfg.ensemble, path_seeds(cfg, path));
  if (wants_jst(cfg.algorithm)) out.jst = jst_run(cfg.ensemble, out.traj);
  if (wants_filter(cfg.algorithm)) {
    out.ckf = ckf_run(cfg.ensemble, out.traj, filter_options(cfg, track_max_eig));
  }
  out.ta_theory = ta_series_oracle(cfg.ensemble, out.traj);
  return out;
}

std::vector<PathResult> run_all_paths(const ExperimentConfig& cfg, bool track_max_eig) {
  std::vector<PathResult> results(static_cast<std::size_t>(cfg.paths));
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(cfg.paths)));
  std::atomic<int> next{0};
  std::vector<std::future<void>> tasks;
  tasks.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    tasks.push_back(std::async(std::launch::async, [&] {
      for (int p = next.fetch_add(1); p < cfg.paths; p = next.fetch_add(1)) {
        results[static_cast<std::size_t>(p)] =
            run_path(cfg, p, track_max_eig && p == 0);
      }
    }));
  }
  for (auto& task : tasks) task.get();
  return results;
}

std::vector<std::string> series_header(int m) {
  std::vector<std::string> header{"k", "t", "TA_jst", "TA_ckf", "TA_theory"};
  for (int i = 1; i <= m; ++i) header.push_back("eps_jst_" + std::to_string(i));
  for (int i = 1; i <= m; ++i) header.push_back("eps_ckf_" + std::to_string(i));
  header.push_back("trace_P");
  return header;
}

void write_series(const fs::path& path, const ExperimentConfig& cfg,
                  const PathResult& result) {
  const int m = cfg.ensemble.size();
  CsvWriter csv(path.string(), series_header(m));
  double t = 0.0;
  for (int k = 0; k <= cfg.ensemble.horizon; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    std::vector<std::string> row;
    row.push_back(std::to_string(k));
    row.push_back(format_double(t));
    row.push_back(result.jst ? format_double(result.jst->ta[ks]) : "");
    row.push_back(result.ckf ? format_double(result.ckf->ta[ks]) : "");
    row.push_back(format_double(result.ta_theory[ks]));
    for (int i = 0; i < m; ++i) {
      row.push_back(result.jst ? format_double(result.jst->residuals[ks](i)) : "");
    }
    for (int i = 0; i < m; ++i) {
      row.push_back(result.ckf ? format_double(result.ckf->residuals[ks](i)) : "");
    }
    row.push_back(result.ckf ? format_double(result.ckf->trace_p[ks]) : "");
    csv.write_row(row);
    if (k < cfg.ensemble.horizon) t += cfg.ensemble.tau_at(k);
  }
}

void write_ptrace(const fs::path& path, const RunOutput& ckf) {
  CsvWriter csv(path.string(), {"k", "trace", "max_eig"});
  for (std::size_t k = 0; k < ckf.trace_p.size(); ++k) {
    std::vector<std::string> row{std::to_string(k), format_double(ckf.trace_p[k]),
                                 k < ckf.max_eig_p.size()
                                     ? format_double(ckf.max_eig_p[k])
                                     : ""};
    csv.write_row(row);
  }
}

void write_bands(const fs::path& path, const std::vector<PathResult>& results,
                 bool use_jst) {
  std::vector<std::vector<double>> ta_paths;
  for (const PathResult& r : results) {
    const std::optional<RunOutput>& run = use_jst ? r.jst : r.ckf;
    if (run) ta_paths.push_back(run->ta);
  }
  if (ta_paths.size() < 2) return;
  const Band band = confidence_band(ta_paths, 0.98);
  CsvWriter csv(path.string(), {"k", "mean", "lo", "hi"});
  for (std::size_t k = 0; k < band.mean.size(); ++k) {
    csv.write_row(std::vector<double>{static_cast<double>(k), band.mean[k],
                                      band.lo[k], band.hi[k]});
  }
}

void append_adev_rows(CsvWriter& csv, const std::string& section,
                      const std::vector<double>& ta, double tau0) {
  if (ta.size() < 3) return;
  const AdevCurve curve = overlapping_adev(ta, tau0);
  for (std::size_t i = 0; i < curve.taus.size(); ++i) {
    csv.write_row(std::vector<std::string>{section, format_double(curve.taus[i]),
                                           format_double(curve.adev[i])});
  }
}

void write_summary(const fs::path& path, const ExperimentConfig& cfg,
                   const std::vector<PathResult>& results) {
  CsvWriter csv(path.string(), {"section", "name", "value"});
  auto row = [&](const std::string& section, const std::string& name,
                 const std::string& value) {
    csv.write_row(std::vector<std::string>{section, name, value});
  };

  const HypothesisReport rep = check_equivalence_hypotheses(cfg.ensemble);
  row("hypotheses", "w_guess_kron", rep.w_guess_kron ? "1" : "0");
  row("hypotheses", "equal_weights", rep.equal_weights ? "1" : "0");
  row("hypotheses", "p0_identity", rep.p0_identity ? "1" : "0");
  row("hypotheses", "r_guess_matches", rep.r_guess_matches ? "1" : "0");
  row("hypotheses", "predicts_equal_ta", rep.predicts_equal_ta ? "1" : "0");

  if (rep.predicts_equal_ta && cfg.ensemble.constant_tau()) {
    const LiResult li = li_criterion(cfg.ensemble, cfg.ensemble.r_true);
    for (int i = 0; i < cfg.ensemble.size(); ++i) {
      row("li", "L_" + std::to_string(i + 1), format_double(li.li(i)));
      row("li", "verdict_" + std::to_string(i + 1),
          std::to_string(li.verdicts[static_cast<std::size_t>(i)]));
    }
    row("li", "global_condition", li.global_condition ? "1" : "0");
    const ObservableSystem obs = observable_decomp(cfg.ensemble, 0);
    row("li", "riccati_residual",
        format_double(riccati_residual(li.p_ss, obs.f_o, obs.h_o, obs.w_o,
                                       cfg.ensemble.r_guess)));
  }

  const PathResult& first = results.front();
  if (first.jst && first.ckf) {
    double max_diff = 0.0;
    double max_ta = 0.0;
    for (std::size_t k = 0; k < first.jst->ta.size(); ++k) {
      max_diff = std::max(max_diff, std::abs(first.jst->ta[k] - first.ckf->ta[k]));
      max_ta = std::max(max_ta, std::abs(first.jst->ta[k]));
    }
    row("compare", "max_abs_diff_ta", format_double(max_diff));
    row("compare", "max_rel_diff_ta",
        format_double(max_ta > 0.0 ? max_diff / max_ta : 0.0));
  }

  if (cfg.ensemble.constant_tau()) {
    const double tau0 = cfg.ensemble.tau_at(0);
    if (first.jst) append_adev_rows(csv, "adev_jst", first.jst->ta, tau0);
    if (first.ckf) append_adev_rows(csv, "adev_ckf", first.ckf->ta, tau0);
  }
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const CommonFlags& flags, bool force_both, bool dump_trajectory = false) {
  ExperimentConfig cfg = load(flags);
  if (force_both) cfg.algorithm = Algorithm::both;
  const bool track_max_eig =
      wants_filter(cfg.algorithm) && filter_options(cfg, true).mode == CkfMode::dense;
  const std::vector<PathResult> results = run_all_paths(cfg, track_max_eig);
  const fs::path dir = prepare_out_dir(cfg);

  if (dump_trajectory) {
    save_trajectory_csv(results.front().traj, (dir / "trajectory.csv").string());
  }
  write_series(dir / "series.csv", cfg, results.front());
  write_summary(dir / "summary.csv", cfg, results);
  if (results.front().ckf) write_ptrace(dir / "ptrace.csv", *results.front().ckf);
  if (cfg.paths > 1) {
    write_bands(dir / "bands.csv", results, wants_jst(cfg.algorithm));
  }

  if (results.front().jst && results.front().ckf) {
    const RunOutput& a = *results.front().jst;
    const RunOutput& b = *results.front().ckf;
    double max_diff = 0.0;
    double max_ta = 0.0;
    for (std::size_t k = 0; k < a.ta.size(); ++k) {
      max_diff = std::max(max_diff, std::abs(a.ta[k] - b.ta[k]));
      max_ta = std::max(max_ta, std::abs(a.ta[k]));
    }
    std::cout << "max |TA_jst - TA_ckf| = " << format_double(max_diff)
              << "  (relative " << format_double(max_ta > 0 ? max_diff / max_ta : 0.0)
              << ")\n";
  }
  std::cout << "wrote " << (dir / "series.csv").string() << "\n";
  return 0;
}

int cmd_allan(const CommonFlags& flags) {
  const ExperimentConfig cfg = load(flags);
  if (!cfg.ensemble.constant_tau()) {
    throw std::invalid_argument("allan: requires a constant sampling interval");
  }
  const std::vector<PathResult> results = run_all_paths(cfg, false);
  const fs::path dir = prepare_out_dir(cfg);
  const double tau0 = cfg.ensemble.tau_at(0);
  auto write_curve = [&](const std::vector<double>& ta, const std::string& name) {
    const AdevCurve curve = overlapping_adev(ta, tau0);
    CsvWriter csv((dir / name).string(), {"tau", "adev"});
    for (std::size_t i = 0; i < curve.taus.size(); ++i) {
      csv.write_row(std::vector<double>{curve.taus[i], curve.adev[i]});
    }
    std::cout << "wrote " << (dir / name).string() << "\n";
  };
  if (results.front().jst) write_curve(results.front().jst->ta, "adev_jst.csv");
  if (results.front().ckf) write_curve(results.front().ckf->ta, "adev_ckf.csv");
  return 0;
}

int cmd_theory(const CommonFlags& flags) {
  const ExperimentConfig cfg = load(flags);
  const fs::path dir = prepare_out_dir(cfg);
  const HypothesisReport rep = check_equivalence_hypotheses(cfg.ensemble);
  std::cout << rep.summary() << "\n";

  CsvWriter csv((dir / "summary.csv").string(), {"section", "name", "value"});
  auto row = [&](const std::string& s, const std::string& n, const std::string& v) {
    csv.write_row(std::vector<std::string>{s, n, v});
  };
  row("hypotheses", "w_guess_kron", rep.w_guess_kron ? "1" : "0");
  row("hypotheses", "equal_weights", rep.equal_weights ? "1" : "0");
  row("hypotheses", "p0_identity", rep.p0_identity ? "1" : "0");
  row("hypotheses", "r_guess_matches", rep.r_guess_matches ? "1" : "0");
  row("hypotheses", "predicts_equal_ta", rep.predicts_equal_ta ? "1" : "0");
  if (rep.predicts_equal_ta && cfg.ensemble.constant_tau()) {
    const LiResult li = li_criterion(cfg.ensemble, cfg.ensemble.r_true);
    for (int i = 0; i < cfg.ensemble.size(); ++i) {
      row("li", "L_" + std::to_string(i + 1), format_double(li.li(i)));
      row("li", "verdict_" + std::to_string(i + 1),
          std::to_string(li.verdicts[static_cast<std::size_t>(i)]));
      std::cout << "L_" << (i + 1) << " = " << format_double(li.li(i)) << "\n";
    }
    row("li", "global_condition", li.global_condition ? "1" : "0");
  }
  std::cout << "wrote " << (dir / "summary.csv").string() << "\n";
  return 0;
}

int cmd_bench(const std::vector<int>& m_list, int repeats, int steps,
              std::uint64_t seed, const std::string& out_dir) {
  const std::vector<BenchPoint> points = bench_runtime(m_list, repeats, steps, seed);
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / "bench.csv";
  CsvWriter csv(path.string(),
                {"m", "jst_mean_s", "ckf_mean_s", "jst_median_of_means_s",
                 "ckf_median_of_means_s"});
  for (const BenchPoint& p : points) {
    csv.write_row(std::vector<double>{static_cast<double>(p.m), p.jst_mean_s,
                                      p.ckf_mean_s, p.jst_median_of_means_s,
                                      p.ckf_median_of_means_s});
    std::cout << "m=" << p.m << "  jst " << format_double(p.jst_mean_s) << " s  ckf "
              << format_double(p.ckf_mean_s) << " s\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atomic-clock ensemble time-scale simulator"};
  app.require_subcommand(1);

  CommonFlags sim_flags, cmp_flags, allan_flags, theory_flags;
  bool dump_trajectory = false;
  CLI::App* sim = app.add_subcommand("simulate", "run the configured algorithms");
  add_common(sim, sim_flags);
  sim->add_flag("--dump-trajectory", dump_trajectory,
                "also write the truth trajectory (trajectory.csv)");
  CLI::App* cmp = app.add_subcommand("compare", "run both algorithms and compare TA");
  add_common(cmp, cmp_flags);
  CLI::App* allan = app.add_subcommand("allan", "Allan deviation of the TA series");
  add_common(allan, allan_flags);
  CLI::App* theory = app.add_subcommand("theory", "hypothesis report and L_i values");
  add_common(theory, theory_flags);

  std::vector<int> m_list{2, 4, 8, 16, 20};
  int repeats = 100;
  int steps = 500;
  std::uint64_t bench_seed = 1;
  std::string bench_out = ".";
  CLI::App* bench = app.add_subcommand("bench", "runtime scaling benchmark");
  bench->add_option("--m-list", m_list, "ensemble sizes");
  bench->add_option("--repeats", repeats, "timed runs per size");
  bench->add_option("--steps", steps, "horizon per run");
  bench->add_option("--seed", bench_seed, "noise seed");
  bench->add_option("--out", bench_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_run(sim_flags, false, dump_trajectory);
    if (cmp->parsed()) return cmd_run(cmp_flags, true);
    if (allan->parsed()) return cmd_allan(allan_flags);
    if (theory->parsed()) return cmd_theory(theory_flags);
    if (bench->parsed()) return cmd_bench(m_list, repeats, steps, bench_seed, bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
