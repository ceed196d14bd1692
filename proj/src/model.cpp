#include "tsgen/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsgen {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace

void ClockSpec::validate() const {
  if (order < 1) throw std::invalid_argument("clock order must be >= 1");
  if (static_cast<int>(sigma.size()) != order) {
    throw std::invalid_argument("clock sigma must have exactly `order` entries");
  }
  for (double s : sigma) {
    if (!(s >= 0.0)) throw std::invalid_argument("clock sigma entries must be >= 0");
  }
}

double EnsembleConfig::tau_at(int k) const {
  if (tau.size() == 1) return tau.front();
  return tau.at(static_cast<std::size_t>(k));
}

void EnsembleConfig::validate() const {
  if (clocks.size() < 2) throw std::invalid_argument("clocks: need at least 2 clocks");
  for (const ClockSpec& c : clocks) c.validate();
  const int n = clocks.front().order;
  for (const ClockSpec& c : clocks) {
    if (c.order != n) {
      throw std::invalid_argument("clocks: all clocks must share the same order");
    }
  }
  const int m = size();
  if (weights.size() != m) throw std::invalid_argument("weights: size must equal clock count");
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("weights: entries must sum to 1");
  }
  if (tau.empty()) throw std::invalid_argument("tau: schedule must not be empty");
  if (tau.size() != 1 && static_cast<int>(tau.size()) < horizon) {
    throw std::invalid_argument("tau: per-step schedule shorter than horizon");
  }
  for (double t : tau) {
    if (!(t > 0.0)) throw std::invalid_argument("tau: intervals must be > 0");
  }
  if (horizon < 1) throw std::invalid_argument("horizon: must be >= 1");
  const int nm = state_dim();
  if (w_guess.rows() != nm || w_guess.cols() != nm) {
    throw std::invalid_argument("w_guess: must be nm x nm");
  }
  if (!w_guess.isApprox(w_guess.transpose(), 1e-12) || !is_psd(w_guess)) {
    throw std::invalid_argument("w_guess: must be symmetric positive semidefinite");
  }
  if (r_guess.rows() != m - 1 || r_guess.cols() != m - 1) {
    throw std::invalid_argument("r_guess: must be (m-1) x (m-1)");
  }
  if (!r_guess.isApprox(r_guess.transpose(), 1e-12) || !is_psd(r_guess)) {
    throw std::invalid_argument("r_guess: must be symmetric positive semidefinite");
  }
  if (r_true.rows() != m - 1 || r_true.cols() != m - 1) {
    throw std::invalid_argument("r_true: must be (m-1) x (m-1)");
  }
  if (!is_psd(r_true)) throw std::invalid_argument("r_true: must be positive semidefinite");
  if (!(p0 > 0.0)) throw std::invalid_argument("p0: must be > 0");
  if (x0.size() != nm) throw std::invalid_argument("x0: must have n*m entries");
  if (x0_guess.size() != nm) throw std::invalid_argument("x0_guess: must have n*m entries");
}

bool EnsembleConfig::kron_w_guess(Matrix* q_out, double rel_tol) const {
  const int n = order();
  const int m = size();
  Matrix q(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) q(a, b) = w_guess(a * m, b * m);
  }
  const Matrix expected = kron(q, Matrix::Identity(m, m));
  const double scale = std::max(w_guess.cwiseAbs().maxCoeff(), 1e-300);
  const bool ok = ((w_guess - expected).cwiseAbs().maxCoeff() <= rel_tol * scale);
  if (ok && q_out != nullptr) *q_out = q;
  return ok;
}

Matrix transition_matrix(int n, double tau) {
  if (n < 1) throw std::invalid_argument("transition_matrix: n must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("transition_matrix: tau must be > 0");
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      a(i, j) = std::pow(tau, j - i) / factorial(j - i);
    }
  }
  return a;
}

Matrix process_noise_cov(const ClockSpec& clock, double tau) {
  clock.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("process_noise_cov: tau must be > 0");
  const int n = clock.order;
  Matrix q = Matrix::Zero(n, n);
  // Channel i feeds entry (a,b) through integral_0^tau s^{i-a}/(i-a)! * s^{i-b}/(i-b)! ds.
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      double sum = 0.0;
      for (int i = std::max(a, b); i < n; ++i) {
        const int pa = i - a;
        const int pb = i - b;
        sum += clock.sigma[static_cast<std::size_t>(i)] *
               std::pow(tau, pa + pb + 1) / (factorial(pa) * factorial(pb) * (pa + pb + 1));
      }
      q(a, b) = sum;
      q(b, a) = sum;
    }
  }
  return q;
}

Matrix true_process_cov(const EnsembleConfig& cfg, double tau) {
  const int n = cfg.order();
  const int m = cfg.size();
  Matrix w = Matrix::Zero(n * m, n * m);
  for (int j = 0; j < m; ++j) {
    const Matrix qj = process_noise_cov(cfg.clocks[static_cast<std::size_t>(j)], tau);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) w(a * m + j, b * m + j) = qj(a, b);
    }
  }
  return w;
}

EnsembleMatrices ensemble_matrices(const EnsembleConfig& cfg, int k) {
  const int n = cfg.order();
  const int m = cfg.size();
  const double tau = cfg.tau_at(k);
  EnsembleMatrices out;
  out.f = kron(transition_matrix(n, tau), Matrix::Identity(m, m));
  Matrix c = Matrix::Zero(1, n);
  c(0, 0) = 1.0;
  out.h = kron(c, diff_matrix(m));
  out.w = true_process_cov(cfg, tau);
  return out;
}

Matrix diff_matrix(int m) {
  if (m < 2) throw std::invalid_argument("diff_matrix: m must be >= 2");
  Matrix v(m - 1, m);
  v << Matrix::Identity(m - 1, m - 1), -Vector::Ones(m - 1);
  return v;
}

Matrix pinv_diff(int m) {
  if (m < 2) throw std::invalid_argument("pinv_diff: m must be >= 2");
  const Matrix center =
      Matrix::Identity(m - 1, m - 1) - Matrix::Constant(m - 1, m - 1, 1.0 / m);
  return diff_matrix(m).transpose() * center;
}

Projections projections(const Vector& beta, double tol) {
  const int m = static_cast<int>(beta.size());
  if (m < 2) throw std::invalid_argument("projections: beta must have >= 2 entries");
  if (std::abs(beta.sum() - 1.0) > tol) {
    throw std::invalid_argument("projections: weights must sum to 1");
  }
  Projections out;
  out.p = Vector::Ones(m) * beta.transpose();
  out.p_bar = Matrix::Identity(m, m) - out.p;
  const Vector centered = beta - Vector::Constant(m, 1.0 / m);
  out.v_ddag = pinv_diff(m) -
               Vector::Ones(m) * (centered.transpose() * basis_head(m));
  return out;
}

Matrix basis_head(int m) {
  Matrix e = Matrix::Zero(m, m - 1);
  e.topRows(m - 1) = Matrix::Identity(m - 1, m - 1);
  return e;
}

JstErrorOperators jst_error_operators(const Vector& beta, int n) {
  const int m = static_cast<int>(beta.size());
  const Projections pr = projections(beta);
  JstErrorOperators out;
  out.f_ddag = Matrix::Zero(n * m, n * m);
  out.f_ddag.topLeftCorner(m, m) = pr.p;
  if (n > 1) {
    out.f_ddag.bottomRightCorner((n - 1) * m, (n - 1) * m) =
        Matrix::Identity((n - 1) * m, (n - 1) * m);
  }
  out.f_bar = Matrix::Zero(n * m, m - 1);
  out.f_bar.topRows(m) = pr.v_ddag;
  return out;
}

ObservableSystem observable_decomp(const EnsembleConfig& cfg, int k) {
  const int n = cfg.order();
  const int m = cfg.size();
  const Matrix in = Matrix::Identity(n, n);
  Matrix c = Matrix::Zero(1, n);
  c(0, 0) = 1.0;
  ObservableSystem out;
  out.f_o = kron(transition_matrix(n, cfg.tau_at(k)), Matrix::Identity(m - 1, m - 1));
  out.h_o = kron(c, Matrix::Identity(m - 1, m - 1));
  out.to_obs = kron(in, diff_matrix(m));
  out.to_common = kron(in, Matrix::Constant(1, m, 1.0 / m));
  out.from_obs = kron(in, pinv_diff(m));
  out.from_common = kron(in, Matrix::Ones(m, 1));
  out.w_o = out.to_obs * cfg.w_guess * out.to_obs.transpose();
  return out;
}

}  // namespace tsgen
