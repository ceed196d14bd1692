#pragma once

// Prediction / weighting / update time-scale algorithm. The weighting step
// equalizes clock residuals using raw clock-difference measurements without
// filtering them; measurement y[k] corrects the prediction of step k.

#include "tsgen/model.hpp"
#include "tsgen/run_output.hpp"
#include "tsgen/simulate.hpp"

namespace tsgen {

struct JstState {
  Vector x_hat;  // predicted full state, nm; blocks 2..n never see measurements
};

// Advances x_hat <- (A(tau) (x) I_m) x_hat blockwise and returns the
// predicted time deviations (first block).
Vector jst_predict(JstState& state, const Matrix& a_tau, int m);

// Weighting and update: d'_m = sum_i beta_i (d_i - y_im) with y_mm = 0,
// then d'_i = d'_m + y_im for i != m.
Vector jst_weight_update(const Vector& d, const Vector& y, const Vector& beta);

enum class JstForm {
  loop,    // procedural per-clock loop
  matrix,  // closed-form update with explicit 1 beta' and e_{1:m-1} matrices
};

RunOutput jst_run(const EnsembleConfig& cfg, const Trajectory& traj,
                  JstForm form = JstForm::loop);

// Second-order variant written as the scalar per-clock loop over predicted
// deviations and fixed frequency rates. Requires n == 2; agrees with
// jst_run exactly.
RunOutput jst_run_second_order(const EnsembleConfig& cfg, const Trajectory& traj);

}  // namespace tsgen
