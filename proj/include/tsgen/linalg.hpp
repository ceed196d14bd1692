#pragma once

#include <Eigen/Dense>

namespace tsgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Kronecker product a (x) b, dense.
Matrix kron(const Matrix& a, const Matrix& b);

// Symmetric PSD square root via eigendecomposition. Negative eigenvalues
// within -tol * max_eig are clamped to zero; anything below throws.
Matrix symmetric_sqrt(const Matrix& a, double tol = 1e-12);

inline void symmetrize(Matrix& a) { a = ((a + a.transpose()) * 0.5).eval(); }

// All eigenvalues >= -tol * max(|eig|, 1).
bool is_psd(const Matrix& a, double tol = 1e-12);

}  // namespace tsgen
