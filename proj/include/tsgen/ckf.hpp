#pragma once

// Kalman-filter time-scale algorithm on the full (undetectable) ensemble
// state, its observable-subspace form, and an exact block-decomposed runner.
//
// The full-state covariance recursion mixes the bounded observable covariance
// with the diverging common mode; in double precision the observable part is
// eventually lost below the common mode's rounding floor. The decomposed
// runner propagates the same recursions in the canonical coordinates
// (observable block, cross block, common block), which is algebraically
// identical and keeps every block at its own scale.

#include <functional>

#include "tsgen/model.hpp"
#include "tsgen/run_output.hpp"
#include "tsgen/simulate.hpp"

namespace tsgen {

struct CkfState {
  Vector x_hat;  // nm
  Matrix p;      // nm x nm error covariance
  Matrix k;      // nm x (m-1) last gain
};

struct ObsCkfState {
  Vector xi_hat;  // n(m-1)
  Matrix p_hat;   // observable error covariance
  Matrix k_hat;   // observable gain
};

// One full-state step: gain, covariance, state, in that order. The plain
// covariance form is the default; the Joseph form is available as an option.
// Throws on singular innovation covariance.
void ckf_step(CkfState& state, const Matrix& f, const Matrix& h, const Matrix& w_guess,
              const Matrix& r_guess, const Vector& y, bool joseph = false);

// One observable-subspace step.
void obs_ckf_step(ObsCkfState& state, const Matrix& f_o, const Matrix& h_o,
                  const Matrix& w_o, const Matrix& r_guess, const Vector& y);

// Covariance reduction strategies for the dense filter. The default strategy
// projects out the unobservable common mode with M = I_n (x) (Vbar^+ Vbar).
using ReductionHook = std::function<Matrix(const Matrix&)>;
Matrix common_mode_projection(const Matrix& p, int n, int m);
ReductionHook make_common_mode_reduction(int n, int m);

enum class CkfMode {
  decomposed,  // exact canonical-coordinate propagation (default)
  dense,       // literal full-state recursion, subject to numerical divergence
};

struct CkfOptions {
  CkfMode mode = CkfMode::decomposed;
  ReductionHook reduction;        // dense mode only, applied after the P update
  bool joseph = false;            // dense mode only
  bool track_max_eig = false;     // record the largest eigenvalue of P per step
};

RunOutput ckf_run(const EnsembleConfig& cfg, const Trajectory& traj,
                  const CkfOptions& opts = {});

// Canonical-coordinate filter state, exposed for cross-checks against the
// dense recursion. Step math: with S = H_o P_oo H_o' + Rhat,
//   K_o = P_oo H_o' S^-1,  g = P_co H_o' S^-1,
//   P_oo <- F_o (P_oo - K_o H_o P_oo) F_o' + W_oo
//   P_co <- A (P_co - g H_o P_oo) F_o' + W_co
//   P_cc <- A (P_cc - g H_o P_co') A' + W_cc
// and the states advance with gains K_o and g on the same innovation.
struct DecomposedCkf {
  Vector xi_o;   // observable predicted state, n(m-1)
  Vector xi_c;   // common-mode predicted state, n
  Matrix p_oo;   // n(m-1) x n(m-1)
  Matrix p_co;   // n x n(m-1), cross block (common row, observable column)
  Matrix p_cc;   // n x n
  Matrix k_o;    // last observable gain
  Matrix g;      // last common-mode gain

  static DecomposedCkf init(const EnsembleConfig& cfg);
  void step(const Matrix& a_tau, const Matrix& f_o, const Matrix& h_o,
            const Matrix& w_oo, const Matrix& w_co, const Matrix& w_cc,
            const Matrix& r_guess, const Vector& y);
  Vector reconstruct_x1(const Matrix& v_dag) const;  // predicted deviations
  double trace_full(const Matrix& v_dag) const;      // trace of the full-state P
};

}  // namespace tsgen
