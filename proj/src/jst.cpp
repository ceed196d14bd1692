#include "tsgen/jst.hpp"

#include <stdexcept>

namespace tsgen {
namespace {

double weighted_ta(const Vector& beta, const Vector& x1_true, const Vector& x1_hat) {
  return beta.dot(x1_true - x1_hat);
}

}  // namespace

Vector jst_predict(JstState& state, const Matrix& a_tau, int m) {
  const int n = static_cast<int>(a_tau.rows());
  if (state.x_hat.size() != static_cast<Index>(n) * m) {
    throw std::invalid_argument("jst_predict: state size does not match a_tau and m");
  }
  Vector next = Vector::Zero(state.x_hat.size());
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      next.segment(a * m, m) += a_tau(a, b) * state.x_hat.segment(b * m, m);
    }
  }
  state.x_hat = std::move(next);
  return state.x_hat.head(m);
}

Vector jst_weight_update(const Vector& d, const Vector& y, const Vector& beta) {
  const int m = static_cast<int>(d.size());
  if (y.size() != m - 1 || beta.size() != m) {
    throw std::invalid_argument("jst_weight_update: dimension mismatch");
  }
  double dm = 0.0;
  for (int i = 0; i < m; ++i) {
    const double yi = (i < m - 1) ? y(i) : 0.0;  // y_mm = 0
    dm += beta(i) * (d(i) - yi);
  }
  Vector out(m);
  for (int i = 0; i < m - 1; ++i) out(i) = dm + y(i);
  out(m - 1) = dm;
  return out;
}

RunOutput jst_run(const EnsembleConfig& cfg, const Trajectory& traj, JstForm form) {
  const int n = cfg.order();
  const int m = cfg.size();
  const int steps = cfg.horizon;
  if (traj.steps() < steps) throw std::invalid_argument("jst_run: trajectory too short");

  RunOutput out;
  out.ta.reserve(static_cast<std::size_t>(steps) + 1);
  out.residuals.reserve(static_cast<std::size_t>(steps) + 1);

  JstState state{cfg.x0_guess};
  out.ta.push_back(weighted_ta(cfg.weights, traj.states[0].head(m), state.x_hat.head(m)));
  out.residuals.push_back(traj.states[0].head(m) - state.x_hat.head(m));

  // Matrix-form operators, built once (constant in k).
  Matrix p_w, e_head;
  if (form == JstForm::matrix) {
    p_w = Vector::Ones(m) * cfg.weights.transpose();
    e_head = basis_head(m);
  }

  double cached_tau = cfg.tau_at(0);
  Matrix a_tau = transition_matrix(n, cached_tau);
  Matrix f = (form == JstForm::matrix)
                 ? kron(a_tau, Matrix::Identity(m, m))
                 : Matrix();

  for (int k = 1; k <= steps; ++k) {
    const double tau_k = cfg.tau_at(k - 1);
    if (tau_k != cached_tau) {
      cached_tau = tau_k;
      a_tau = transition_matrix(n, tau_k);
      if (form == JstForm::matrix) f = kron(a_tau, Matrix::Identity(m, m));
    }
    const Vector& y = traj.measurements[static_cast<std::size_t>(k)];

    if (form == JstForm::loop) {
      const Vector d = jst_predict(state, a_tau, m);
      state.x_hat.head(m) = jst_weight_update(d, y, cfg.weights);
    } else {
      // One step of the closed-form recursion: the first block becomes
      // 1 beta' { (C (x) I_m) F xhat - e_{1:m-1} y } + e_{1:m-1} y,
      // the remaining blocks advance by A_{2:n} (x) I_m.
      const Vector predicted = f * state.x_hat;
      const Vector ey = e_head * y;
      state.x_hat = predicted;
      state.x_hat.head(m) = p_w * (predicted.head(m) - ey) + ey;
    }

    out.ta.push_back(
        weighted_ta(cfg.weights, traj.states[static_cast<std::size_t>(k)].head(m),
                    state.x_hat.head(m)));
    out.residuals.push_back(traj.states[static_cast<std::size_t>(k)].head(m) -
                            state.x_hat.head(m));
  }
  return out;
}

RunOutput jst_run_second_order(const EnsembleConfig& cfg, const Trajectory& traj) {
  if (cfg.order() != 2) {
    throw std::invalid_argument("jst_run_second_order: requires order-2 clocks");
  }
  const int m = cfg.size();
  const int steps = cfg.horizon;
  if (traj.steps() < steps) {
    throw std::invalid_argument("jst_run_second_order: trajectory too short");
  }

  // Scalar per-clock form: deviations advance by the fixed rate guesses,
  // then the weighting and update passes run over plain arrays.
  std::vector<double> dev(static_cast<std::size_t>(m));
  std::vector<double> rate(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    dev[static_cast<std::size_t>(i)] = cfg.x0_guess(i);
    rate[static_cast<std::size_t>(i)] = cfg.x0_guess(m + i);
  }

  RunOutput out;
  out.ta.reserve(static_cast<std::size_t>(steps) + 1);
  out.residuals.reserve(static_cast<std::size_t>(steps) + 1);
  auto record = [&](int k) {
    const Vector& x1 = traj.states[static_cast<std::size_t>(k)];
    Vector eps(m);
    double ta = 0.0;
    for (int i = 0; i < m; ++i) {
      eps(i) = x1(i) - dev[static_cast<std::size_t>(i)];
      ta += cfg.weights(i) * eps(i);
    }
    out.ta.push_back(ta);
    out.residuals.push_back(eps);
  };
  record(0);

  for (int k = 1; k <= steps; ++k) {
    const double tau_k = cfg.tau_at(k - 1);
    for (int i = 0; i < m; ++i) {
      dev[static_cast<std::size_t>(i)] += rate[static_cast<std::size_t>(i)] * tau_k;
    }
    const Vector& y = traj.measurements[static_cast<std::size_t>(k)];
    double dm = 0.0;
    for (int i = 0; i < m; ++i) {
      const double yi = (i < m - 1) ? y(i) : 0.0;
      dm += cfg.weights(i) * (dev[static_cast<std::size_t>(i)] - yi);
    }
    for (int i = 0; i < m - 1; ++i) dev[static_cast<std::size_t>(i)] = dm + y(i);
    dev[static_cast<std::size_t>(m - 1)] = dm;
    record(k);
  }
  return out;
}

}  // namespace tsgen
