#pragma once

// Discrete state-space model of an m-clock ensemble with nth-order clocks.
//
// State layout is derivative-order-major: x = (x_1', ..., x_n')' where
// x_i in R^m collects derivative order i across clocks. Block 1 is the
// vector of time deviations. All Kronecker products follow this layout.

#include <vector>

#include "tsgen/linalg.hpp"

namespace tsgen {

struct ClockSpec {
  int order = 0;               // n >= 1
  std::vector<double> sigma;   // diffusion coefficient per noise channel, size n

  void validate() const;       // throws std::invalid_argument
};

struct EnsembleConfig {
  std::vector<ClockSpec> clocks;  // m >= 2, all with the same order
  Vector weights;                 // beta, sums to 1
  std::vector<double> tau;        // sampling schedule; size 1 = constant
  int horizon = 0;                // number of steps T
  Matrix w_guess;                 // What, nm x nm
  Matrix r_guess;                 // Rhat, (m-1) x (m-1)
  Matrix r_true;                  // actual measurement covariance
  double p0 = 1e-8;               // P_0 = p0 * I
  Vector x0;                      // true initial state, nm
  Vector x0_guess;                // initial predicted state, nm

  int order() const { return clocks.empty() ? 0 : clocks.front().order; }
  int size() const { return static_cast<int>(clocks.size()); }
  int state_dim() const { return order() * size(); }
  double tau_at(int k) const;
  bool constant_tau() const { return tau.size() == 1; }

  void validate() const;  // throws std::invalid_argument with field name

  // True if w_guess == Q (x) I_m for some Q (within rel_tol); extracts Q.
  bool kron_w_guess(Matrix* q_out = nullptr, double rel_tol = 1e-9) const;
};

// Upper-triangular Taylor transition matrix A(tau), entry (i,j) = tau^{j-i}/(j-i)!.
Matrix transition_matrix(int n, double tau);

// Per-clock process noise covariance Q(tau) of the exactly discretized model,
// entry (a,b) = sum_i sigma_i * integral_0^tau [A(s)]_{a,i} [A(s)]_{b,i} ds
// evaluated in closed polynomial form.
Matrix process_noise_cov(const ClockSpec& clock, double tau);

// True process-noise covariance of the full ensemble state, assembled from
// per-clock Q^j(tau) blocks (block-diagonal by clock in the order-major layout).
Matrix true_process_cov(const EnsembleConfig& cfg, double tau);

struct EnsembleMatrices {
  Matrix f;  // A(tau_k) (x) I_m
  Matrix h;  // C (x) Vbar
  Matrix w;  // true process covariance at tau_k
};
EnsembleMatrices ensemble_matrices(const EnsembleConfig& cfg, int k);

// Vbar = [I_{m-1}, -1] and its Moore-Penrose pseudoinverse
// Vbar^+ = Vbar' (I - (1/m) 1 1').
Matrix diff_matrix(int m);
Matrix pinv_diff(int m);

struct Projections {
  Matrix p;       // 1 beta'
  Matrix p_bar;   // I - 1 beta'
  Matrix v_ddag;  // Vbar^+ - 1 (beta - (1/m) 1)' e_{1:m-1}
};
Projections projections(const Vector& beta, double tol = 1e-12);

// e_{1:m-1} = [I_{m-1}; 0], m x (m-1).
Matrix basis_head(int m);

// Block operators of the weight-update error recursion:
// f_ddag = [C (x) P; 0, I_{(n-1)m}], f_bar = [v_ddag; 0].
struct JstErrorOperators {
  Matrix f_ddag;
  Matrix f_bar;
};
JstErrorOperators jst_error_operators(const Vector& beta, int n);

// Observable Kalman canonical decomposition: xi_o = (I (x) Vbar) x,
// xi_c = (1/m)(I (x) 1') x, with x = (I (x) Vbar^+) xi_o + (I (x) 1) xi_c.
struct ObservableSystem {
  Matrix f_o;          // A(tau_k) (x) I_{m-1}
  Matrix h_o;          // C (x) I_{m-1}
  Matrix w_o;          // (I (x) Vbar) What (I (x) Vbar)'
  Matrix to_obs;       // I_n (x) Vbar
  Matrix to_common;    // (1/m) I_n (x) 1'
  Matrix from_obs;     // I_n (x) Vbar^+
  Matrix from_common;  // I_n (x) 1
};
ObservableSystem observable_decomp(const EnsembleConfig& cfg, int k);

}  // namespace tsgen
