#include "tsgen/ckf.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace tsgen {
namespace {

// Solve S X = B for symmetric S, rejecting (near-)singular innovation
// covariances explicitly.
Matrix solve_innovation(const Matrix& s, const Matrix& b) {
  Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("ckf: innovation covariance factorization failed");
  }
  const Vector d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= dmax * 1e-15) {
    throw std::runtime_error("ckf: singular innovation covariance");
  }
  return ldlt.solve(b);
}

}  // namespace

void ckf_step(CkfState& state, const Matrix& f, const Matrix& h, const Matrix& w_guess,
              const Matrix& r_guess, const Vector& y, bool joseph) {
  const Matrix pht = state.p * h.transpose();
  const Matrix s = h * pht + r_guess;
  state.k = solve_innovation(s, pht.transpose()).transpose();
  if (joseph) {
    const Matrix ikh = Matrix::Identity(state.p.rows(), state.p.cols()) - state.k * h;
    state.p = f * (ikh * state.p * ikh.transpose() +
                   state.k * r_guess * state.k.transpose()) * f.transpose() + w_guess;
  } else {
    state.p = f * (state.p - state.k * h * state.p) * f.transpose() + w_guess;
  }
  symmetrize(state.p);
  state.x_hat = f * state.x_hat + state.k * (y - h * state.x_hat);
}

void obs_ckf_step(ObsCkfState& state, const Matrix& f_o, const Matrix& h_o,
                  const Matrix& w_o, const Matrix& r_guess, const Vector& y) {
  const Matrix pht = state.p_hat * h_o.transpose();
  const Matrix s = h_o * pht + r_guess;
  state.k_hat = solve_innovation(s, pht.transpose()).transpose();
  state.p_hat = f_o * (state.p_hat - state.k_hat * h_o * state.p_hat) * f_o.transpose() + w_o;
  symmetrize(state.p_hat);
  state.xi_hat = f_o * state.xi_hat + state.k_hat * (y - h_o * state.xi_hat);
}

Matrix common_mode_projection(const Matrix& p, int n, int m) {
  if (p.rows() != static_cast<Index>(n) * m || p.cols() != p.rows()) {
    throw std::invalid_argument("common_mode_projection: dimension mismatch");
  }
  const Matrix proj = kron(Matrix::Identity(n, n), pinv_diff(m) * diff_matrix(m));
  Matrix out = proj * p * proj.transpose();
  symmetrize(out);
  return out;
}

ReductionHook make_common_mode_reduction(int n, int m) {
  return [n, m](const Matrix& p) { return common_mode_projection(p, n, m); };
}

DecomposedCkf DecomposedCkf::init(const EnsembleConfig& cfg) {
  const ObservableSystem obs = observable_decomp(cfg, 0);
  const int nm = cfg.state_dim();
  const Matrix p0 = cfg.p0 * Matrix::Identity(nm, nm);
  DecomposedCkf s;
  s.xi_o = obs.to_obs * cfg.x0_guess;
  s.xi_c = obs.to_common * cfg.x0_guess;
  s.p_oo = obs.to_obs * p0 * obs.to_obs.transpose();
  s.p_co = obs.to_common * p0 * obs.to_obs.transpose();
  s.p_cc = obs.to_common * p0 * obs.to_common.transpose();
  return s;
}

void DecomposedCkf::step(const Matrix& a_tau, const Matrix& f_o, const Matrix& h_o,
                         const Matrix& w_oo, const Matrix& w_co, const Matrix& w_cc,
                         const Matrix& r_guess, const Vector& y) {
  const Matrix pht_o = p_oo * h_o.transpose();
  const Matrix s = h_o * pht_o + r_guess;
  // One factorization serves both gains.
  Matrix rhs(s.rows(), pht_o.rows() + p_co.rows());
  rhs.leftCols(pht_o.rows()) = pht_o.transpose();
  rhs.rightCols(p_co.rows()) = (p_co * h_o.transpose()).transpose();
  const Matrix solved = solve_innovation(s, rhs);
  k_o = solved.leftCols(pht_o.rows()).transpose();
  g = solved.rightCols(p_co.rows()).transpose();

  const Matrix p_oo_next = f_o * (p_oo - k_o * h_o * p_oo) * f_o.transpose() + w_oo;
  const Matrix p_co_next = a_tau * (p_co - g * h_o * p_oo) * f_o.transpose() + w_co;
  const Matrix p_cc_next =
      a_tau * (p_cc - g * h_o * p_co.transpose()) * a_tau.transpose() + w_cc;

  const Vector innovation = y - h_o * xi_o;
  xi_o = f_o * xi_o + k_o * innovation;
  xi_c = a_tau * xi_c + g * innovation;

  p_oo = p_oo_next;
  symmetrize(p_oo);
  p_co = p_co_next;
  p_cc = p_cc_next;
  symmetrize(p_cc);
}

Vector DecomposedCkf::reconstruct_x1(const Matrix& v_dag) const {
  const int m = static_cast<int>(v_dag.rows());
  return v_dag * xi_o.head(m - 1) + Vector::Ones(m) * xi_c(0);
}

double DecomposedCkf::trace_full(const Matrix& v_dag) const {
  // Cross blocks do not contribute: (I (x) 1') (I (x) Vbar^+) = 0.
  const int n = static_cast<int>(p_cc.rows());
  const int m = static_cast<int>(v_dag.rows());
  const Matrix gram = kron(Matrix::Identity(n, n), v_dag.transpose() * v_dag);
  return (p_oo * gram).trace() + m * p_cc.trace();
}

RunOutput ckf_run(const EnsembleConfig& cfg, const Trajectory& traj, const CkfOptions& opts) {
  const int n = cfg.order();
  const int m = cfg.size();
  const int steps = cfg.horizon;
  if (traj.steps() < steps) throw std::invalid_argument("ckf_run: trajectory too short");
  if (opts.reduction && opts.mode != CkfMode::dense) {
    throw std::invalid_argument("ckf_run: covariance reduction requires dense mode");
  }

  RunOutput out;
  out.ta.reserve(static_cast<std::size_t>(steps) + 1);
  out.residuals.reserve(static_cast<std::size_t>(steps) + 1);
  out.trace_p.reserve(static_cast<std::size_t>(steps) + 1);

  const ObservableSystem obs = observable_decomp(cfg, 0);
  const Matrix v_dag = pinv_diff(m);

  auto record = [&](int k, const Vector& x1_hat, double trace_p, double max_eig) {
    const Vector& x = traj.states[static_cast<std::size_t>(k)];
    out.ta.push_back(cfg.weights.dot(x.head(m) - x1_hat));
    out.residuals.push_back(x.head(m) - x1_hat);
    out.trace_p.push_back(trace_p);
    if (opts.track_max_eig) out.max_eig_p.push_back(max_eig);
  };

  if (opts.mode == CkfMode::decomposed) {
    DecomposedCkf s = DecomposedCkf::init(cfg);
    const Matrix w_oo = obs.to_obs * cfg.w_guess * obs.to_obs.transpose();
    const Matrix w_co = obs.to_common * cfg.w_guess * obs.to_obs.transpose();
    const Matrix w_cc = obs.to_common * cfg.w_guess * obs.to_common.transpose();

    auto max_eig_blocks = [&]() {
      if (!opts.track_max_eig) return 0.0;
      Matrix p_full = obs.from_obs * s.p_oo * obs.from_obs.transpose() +
                      obs.from_common * s.p_co * obs.from_obs.transpose() +
                      obs.from_obs * s.p_co.transpose() * obs.from_common.transpose() +
                      obs.from_common * s.p_cc * obs.from_common.transpose();
      symmetrize(p_full);
      Eigen::SelfAdjointEigenSolver<Matrix> es(p_full, Eigen::EigenvaluesOnly);
      return es.eigenvalues().maxCoeff();
    };

    double cached_tau = cfg.tau_at(0);
    Matrix a_tau = transition_matrix(n, cached_tau);
    Matrix f_o = kron(a_tau, Matrix::Identity(m - 1, m - 1));
    record(0, s.reconstruct_x1(v_dag), s.trace_full(v_dag), max_eig_blocks());
    for (int k = 0; k < steps; ++k) {
      const double tau_k = cfg.tau_at(k);
      if (tau_k != cached_tau) {
        cached_tau = tau_k;
        a_tau = transition_matrix(n, tau_k);
        f_o = kron(a_tau, Matrix::Identity(m - 1, m - 1));
      }
      s.step(a_tau, f_o, obs.h_o, w_oo, w_co, w_cc, cfg.r_guess,
             traj.measurements[static_cast<std::size_t>(k)]);
      record(k + 1, s.reconstruct_x1(v_dag), s.trace_full(v_dag), max_eig_blocks());
    }
    return out;
  }

  CkfState s;
  s.x_hat = cfg.x0_guess;
  s.p = cfg.p0 * Matrix::Identity(cfg.state_dim(), cfg.state_dim());
  Matrix c = Matrix::Zero(1, n);
  c(0, 0) = 1.0;
  const Matrix h = kron(c, diff_matrix(m));

  auto max_eig = [&](const Matrix& p) {
    if (!opts.track_max_eig) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };

  double cached_tau = cfg.tau_at(0);
  Matrix f = kron(transition_matrix(n, cached_tau), Matrix::Identity(m, m));
  record(0, s.x_hat.head(m), s.p.trace(), max_eig(s.p));
  for (int k = 0; k < steps; ++k) {
    const double tau_k = cfg.tau_at(k);
    if (tau_k != cached_tau) {
      cached_tau = tau_k;
      f = kron(transition_matrix(n, tau_k), Matrix::Identity(m, m));
    }
    ckf_step(s, f, h, cfg.w_guess, cfg.r_guess,
             traj.measurements[static_cast<std::size_t>(k)], opts.joseph);
    if (opts.reduction) {
      s.p = opts.reduction(s.p);
      symmetrize(s.p);
    }
    record(k + 1, s.x_hat.head(m), s.p.trace(), max_eig(s.p));
  }
  return out;
}

}  // namespace tsgen
