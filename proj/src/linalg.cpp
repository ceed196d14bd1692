#include "tsgen/linalg.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace tsgen {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix symmetric_sqrt(const Matrix& a, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_sqrt: eigendecomposition failed");
  }
  const Vector& ev = es.eigenvalues();
  const double floor = -tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vector root(ev.size());
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) {
      throw std::runtime_error("symmetric_sqrt: matrix is not positive semidefinite");
    }
    root(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  }
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

bool is_psd(const Matrix& a, double tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) return false;
  const Vector& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  return ev.minCoeff() >= -tol * scale;
}

}  // namespace tsgen
