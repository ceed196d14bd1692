#include "tsgen/theory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace tsgen {
namespace {

Vector weighted_blocks(const Vector& x, const Vector& beta, int n) {
  const int m = static_cast<int>(beta.size());
  Vector out(n);
  for (int a = 0; a < n; ++a) out(a) = beta.dot(x.segment(a * m, m));
  return out;
}

void require_constant_tau(const EnsembleConfig& cfg, const char* who) {
  if (!cfg.constant_tau()) {
    throw std::invalid_argument(std::string(who) + ": requires a constant sampling interval");
  }
}

bool equal_weights(const Vector& beta, double tol = 1e-12) {
  const double w = 1.0 / static_cast<double>(beta.size());
  return (beta.array() - w).abs().maxCoeff() <= tol;
}

bool homogeneous_clocks(const EnsembleConfig& cfg) {
  for (const ClockSpec& c : cfg.clocks) {
    if (c.sigma != cfg.clocks.front().sigma) return false;
  }
  return true;
}

// Doubling pass for the filter Riccati equation, on scale-normalized data.
// Produces the stabilizing fixed point quadratically; requires r > 0.
Matrix riccati_doubling(const Matrix& f_o, const Matrix& h_o, const Matrix& w_o,
                        const Matrix& r_guess) {
  const double scale = std::max(w_o.cwiseAbs().maxCoeff(), r_guess.cwiseAbs().maxCoeff());
  if (!(scale > 0.0)) return Matrix::Zero(f_o.rows(), f_o.cols());

  Eigen::LLT<Matrix> rllt(r_guess / scale);
  if (rllt.info() != Eigen::Success) {
    throw std::runtime_error("riccati: doubling requires positive definite r_guess");
  }
  Matrix a = f_o.transpose();
  Matrix g = h_o.transpose() * rllt.solve(h_o);
  Matrix x = w_o / scale;
  const Matrix eye = Matrix::Identity(a.rows(), a.cols());
  for (int it = 0; it < 200; ++it) {
    const Matrix igx = eye + g * x;
    Eigen::PartialPivLU<Matrix> lu(igx);
    const Matrix m = lu.solve(a);
    const Matrix x_next = x + a.transpose() * x * m;
    const Matrix g_next = g + a * lu.solve(g) * a.transpose();
    a = a * m;
    const double dx = (x_next - x).cwiseAbs().maxCoeff();
    const double xs = std::max(x_next.cwiseAbs().maxCoeff(), 1e-300);
    x = x_next;
    symmetrize(x);
    g = g_next;
    symmetrize(g);
    if (dx <= 1e-15 * xs) break;
  }
  return x * scale;
}

Matrix riccati_iterate_once(const Matrix& p, const Matrix& f_o, const Matrix& h_o,
                            const Matrix& w_o, const Matrix& r_guess) {
  const Matrix pht = p * h_o.transpose();
  const Matrix s = h_o * pht + r_guess;
  Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("riccati: innovation covariance factorization failed");
  }
  const Matrix k = ldlt.solve(pht.transpose()).transpose();
  Matrix next = f_o * (p - k * h_o * p) * f_o.transpose() + w_o;
  symmetrize(next);
  return next;
}

}  // namespace

Vector ta_recursion_step(const Vector& eps_ens, const Matrix& a_tau,
                         const Vector& beta, const Vector& v) {
  const int n = static_cast<int>(a_tau.rows());
  if (eps_ens.size() != n || v.size() != static_cast<Index>(n) * beta.size()) {
    throw std::invalid_argument("ta_recursion_step: dimension mismatch");
  }
  return a_tau * eps_ens + weighted_blocks(v, beta, n);
}

std::vector<double> ta_series_oracle(const EnsembleConfig& cfg, const Trajectory& traj) {
  const int n = cfg.order();
  const int steps = cfg.horizon;
  Vector eps_ens = weighted_blocks(cfg.x0 - cfg.x0_guess, cfg.weights, n);
  std::vector<double> ta;
  ta.reserve(static_cast<std::size_t>(steps) + 1);
  ta.push_back(eps_ens(0));
  double cached_tau = cfg.tau_at(0);
  Matrix a_tau = transition_matrix(n, cached_tau);
  for (int k = 0; k < steps; ++k) {
    const double tau_k = cfg.tau_at(k);
    if (tau_k != cached_tau) {
      cached_tau = tau_k;
      a_tau = transition_matrix(n, tau_k);
    }
    eps_ens = ta_recursion_step(eps_ens, a_tau, cfg.weights,
                                traj.process_noises[static_cast<std::size_t>(k)]);
    ta.push_back(eps_ens(0));
  }
  return ta;
}

TaMoments ta_moments(const EnsembleConfig& cfg, const Vector& mu0,
                     const Matrix& p0_full, int k) {
  require_constant_tau(cfg, "ta_moments");
  if (!homogeneous_clocks(cfg)) {
    throw std::invalid_argument("ta_moments: requires identical clocks (W = Q (x) I_m)");
  }
  const int n = cfg.order();
  const int m = cfg.size();
  if (mu0.size() != n) throw std::invalid_argument("ta_moments: mu0 must have n entries");
  const Matrix a = transition_matrix(n, cfg.tau_at(0));
  const Matrix q = process_noise_cov(cfg.clocks.front(), cfg.tau_at(0));
  const double bb = cfg.weights.squaredNorm();  // beta' beta

  // Reduced initial covariance (I (x) beta') P0 (I (x) beta).
  Matrix p0r = Matrix::Zero(n, n);
  if (p0_full.size() != 0) {
    if (p0_full.rows() != static_cast<Index>(n) * m) {
      throw std::invalid_argument("ta_moments: p0_full must be nm x nm (or empty)");
    }
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        p0r(r, c) = (cfg.weights.transpose() *
                     p0_full.block(r * m, c * m, m, m) * cfg.weights).value();
      }
    }
  }

  Matrix a_pow = Matrix::Identity(n, n);
  Matrix accum = Matrix::Zero(n, n);
  for (int i = 0; i < k; ++i) {
    accum += a_pow * (bb * q) * a_pow.transpose();
    a_pow = a * a_pow;  // holds A^{i+1}; ends at A^k
  }
  const Vector mean_vec = a_pow * mu0;
  const Matrix cov = a_pow * p0r * a_pow.transpose() + accum;
  return TaMoments{mean_vec(0), cov(0, 0)};
}

ResidualTheory residual_theory(const EnsembleConfig& cfg, const Trajectory& traj) {
  if (!equal_weights(cfg.weights)) {
    throw std::invalid_argument("residual_theory: requires equal weights");
  }
  if (!cfg.kron_w_guess()) {
    throw std::invalid_argument("residual_theory: requires w_guess = Q (x) I_m");
  }
  const int n = cfg.order();
  const int m = cfg.size();
  const int steps = cfg.horizon;
  const ObservableSystem obs = observable_decomp(cfg, 0);
  const Matrix v_dag = pinv_diff(m);

  // Observable filter covariance recursion supplies the gain sequence; the
  // error recursions are driven by the realized noises.
  Matrix p_hat = cfg.p0 * obs.to_obs * obs.to_obs.transpose();
  Vector eps_o = obs.to_obs * (cfg.x0 - cfg.x0_guess);
  Vector eps_c = obs.to_common * (cfg.x0 - cfg.x0_guess);

  ResidualTheory out;
  out.eps1_jst.reserve(static_cast<std::size_t>(steps) + 1);
  out.eps1_ckf.reserve(static_cast<std::size_t>(steps) + 1);
  out.ta.reserve(static_cast<std::size_t>(steps) + 1);

  const Vector eps1_0 = cfg.x0.head(m) - cfg.x0_guess.head(m);
  out.eps1_jst.push_back(eps1_0);
  out.eps1_ckf.push_back(eps1_0);
  out.ta.push_back(eps_c(0));

  double cached_tau = cfg.tau_at(0);
  Matrix a_tau = transition_matrix(n, cached_tau);
  Matrix f_o = kron(a_tau, Matrix::Identity(m - 1, m - 1));
  for (int k = 0; k < steps; ++k) {
    const double tau_k = cfg.tau_at(k);
    if (tau_k != cached_tau) {
      cached_tau = tau_k;
      a_tau = transition_matrix(n, tau_k);
      f_o = kron(a_tau, Matrix::Identity(m - 1, m - 1));
    }
    const Matrix pht = p_hat * obs.h_o.transpose();
    const Matrix s = obs.h_o * pht + cfg.r_guess;
    Eigen::LDLT<Matrix> ldlt(s);
    const Matrix k_hat = ldlt.solve(pht.transpose()).transpose();
    p_hat = f_o * (p_hat - k_hat * obs.h_o * p_hat) * f_o.transpose() + obs.w_o;
    symmetrize(p_hat);

    const Vector& v = traj.process_noises[static_cast<std::size_t>(k)];
    const Vector& w = traj.measurement_noises[static_cast<std::size_t>(k)];
    eps_o = (f_o - k_hat * obs.h_o) * eps_o - k_hat * w + obs.to_obs * v;
    eps_c = a_tau * eps_c + obs.to_common * v;

    const double ta = eps_c(0);
    const Vector& w_next = traj.measurement_noises[static_cast<std::size_t>(k) + 1];
    out.eps1_jst.push_back(Vector(-v_dag * w_next + Vector::Constant(m, ta)));
    out.eps1_ckf.push_back(
        Vector(v_dag * (obs.h_o * eps_o) + Vector::Constant(m, ta)));
    out.ta.push_back(ta);
  }
  return out;
}

Matrix riccati_steady_state(const Matrix& f_o, const Matrix& h_o, const Matrix& w_o,
                            const Matrix& r_guess, double tol, int max_iter) {
  Matrix p;
  bool doubled = false;
  try {
    p = riccati_doubling(f_o, h_o, w_o, r_guess);
    doubled = true;
  } catch (const std::runtime_error&) {
    p = w_o;  // singular r_guess: plain iteration from the covariance input
  }

  // Plain filter-recursion iterations confirm (or reach) the fixed point:
  // relative change <= tol on 10 consecutive steps.
  int consecutive = 0;
  for (int it = 0; it < max_iter; ++it) {
    const Matrix next = riccati_iterate_once(p, f_o, h_o, w_o, r_guess);
    const double scale = std::max(next.norm(), 1e-300);
    const double rel = (next - p).norm() / scale;
    p = next;
    consecutive = rel <= tol ? consecutive + 1 : 0;
    if (consecutive >= 10) return p;
  }
  throw std::runtime_error(doubled
                               ? "riccati_steady_state: no convergence after doubling"
                               : "riccati_steady_state: no convergence within max_iter");
}

double riccati_residual(const Matrix& p, const Matrix& f_o, const Matrix& h_o,
                        const Matrix& w_o, const Matrix& r_guess) {
  const Matrix pht = p * h_o.transpose();
  const Matrix s = h_o * pht + r_guess;
  Eigen::LDLT<Matrix> ldlt(s);
  const Matrix res = f_o * p * f_o.transpose() -
                     (f_o * pht) * ldlt.solve((f_o * pht).transpose()) - p + w_o;
  return res.norm() / std::max(p.norm(), 1e-300);
}

std::string HypothesisReport::summary() const {
  std::ostringstream os;
  os << "w_guess_kron=" << (w_guess_kron ? "yes" : "no")
     << " equal_weights=" << (equal_weights ? "yes" : "no")
     << " p0_identity=" << (p0_identity ? "yes" : "no")
     << " r_guess_matches=" << (r_guess_matches ? "yes" : "no")
     << " predicts_equal_ta=" << (predicts_equal_ta ? "yes" : "no");
  return os.str();
}

HypothesisReport check_equivalence_hypotheses(const EnsembleConfig& cfg) {
  HypothesisReport rep;
  Matrix q;
  rep.w_guess_kron = cfg.kron_w_guess(&q);
  if (rep.w_guess_kron) rep.q = q;
  rep.equal_weights = equal_weights(cfg.weights);
  rep.p0_identity = true;  // P_0 = p0 I by construction
  rep.r_guess_matches =
      (cfg.r_guess - cfg.r_true).cwiseAbs().maxCoeff() <=
      1e-12 * std::max(cfg.r_true.cwiseAbs().maxCoeff(), 1e-300);
  rep.predicts_equal_ta = rep.w_guess_kron && rep.equal_weights && rep.p0_identity;
  return rep;
}

LiResult li_criterion(const EnsembleConfig& cfg, const Matrix& r_true) {
  if (!equal_weights(cfg.weights) || !cfg.kron_w_guess()) {
    throw std::invalid_argument(
        "li_criterion: requires equal weights and w_guess = Q (x) I_m");
  }
  require_constant_tau(cfg, "li_criterion");
  const int m = cfg.size();
  if (r_true.rows() != m - 1 || r_true.cols() != m - 1) {
    throw std::invalid_argument("li_criterion: r_true must be (m-1) x (m-1)");
  }
  const ObservableSystem obs = observable_decomp(cfg, 0);
  LiResult out;
  out.p_ss = riccati_steady_state(obs.f_o, obs.h_o, obs.w_o, cfg.r_guess);
  const Matrix z = obs.h_o * out.p_ss * obs.h_o.transpose();
  const Matrix d = r_true - z;
  const Matrix v_dag = pinv_diff(m);
  out.li = (v_dag * d * v_dag.transpose()).diagonal();
  out.zero_tol = 1e-6 * d.norm();
  out.verdicts.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double li = out.li(i);
    out.verdicts[static_cast<std::size_t>(i)] =
        li < -out.zero_tol ? -1 : (li > out.zero_tol ? 1 : 0);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
  out.global_condition = es.eigenvalues().maxCoeff() < -out.zero_tol;
  return out;
}

TheoryOracle TheoryOracle::build(const EnsembleConfig& cfg) {
  if (!equal_weights(cfg.weights)) {
    throw std::invalid_argument("TheoryOracle: requires equal weights");
  }
  require_constant_tau(cfg, "TheoryOracle");
  TheoryOracle oracle;
  oracle.cfg = cfg;
  if (!cfg.kron_w_guess(&oracle.q)) {
    throw std::invalid_argument("TheoryOracle: requires w_guess = Q (x) I_m");
  }
  const int m = cfg.size();
  oracle.a = transition_matrix(cfg.order(), cfg.tau_at(0));
  oracle.v_bar = diff_matrix(m);
  oracle.v_dag = pinv_diff(m);
  const ObservableSystem obs = observable_decomp(cfg, 0);
  oracle.f_o = obs.f_o;
  oracle.h_o = obs.h_o;
  oracle.w_o = obs.w_o;
  oracle.p_ss = riccati_steady_state(obs.f_o, obs.h_o, obs.w_o, cfg.r_guess);
  return oracle;
}

}  // namespace tsgen
