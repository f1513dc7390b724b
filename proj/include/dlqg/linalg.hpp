#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

namespace dlqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest eigenvalue modulus of a square matrix.
inline double spectral_radius(const Eigen::Ref<const Matrix>& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Matrix symmetrized(const Eigen::Ref<const Matrix>& X) { return 0.5 * (X + X.transpose()); }

inline double max_abs(const Eigen::Ref<const Matrix>& X) {
  return X.size() == 0 ? 0.0 : X.cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the symmetric part of X.
inline double min_sym_eigenvalue(const Eigen::Ref<const Matrix>& X) {
  if (X.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(X), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// ‖X − Y‖_F / max(1, ‖X‖_F)
inline double relative_difference(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y) {
  return (X - Y).norm() / std::max(1.0, X.norm());
}

inline bool is_symmetric(const Eigen::Ref<const Matrix>& X, double tol) {
  if (X.rows() != X.cols()) return false;
  const double scale = std::max(1.0, max_abs(X));
  return max_abs(X - X.transpose()) <= tol * scale;
}

/// Popov–Belevitch–Hautus test: every eigenvalue λ of A with |λ| ≥ 1 − rank_tol must have
/// [λI − A, B] of full row rank. Rank is judged by the smallest singular value relative to
/// the matrix norm.
inline bool pbh_stabilizable(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                             double rank_tol) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Eigen::Index n = A.rows();
  if (n == 0) return true;
  Eigen::EigenSolver<Matrix> es(A, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex lambda = es.eigenvalues()(i);
    if (std::abs(lambda) < 1.0 - rank_tol) continue;
    CMatrix M(n, n + B.cols());
    M.leftCols(n) = lambda * CMatrix::Identity(n, n) - A.cast<Complex>();
    M.rightCols(B.cols()) = B.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(M);
    const auto& s = svd.singularValues();
    const double smin = s.size() < n ? 0.0 : s(n - 1);
    if (smin <= rank_tol * std::max(1.0, s(0))) return false;
  }
  return true;
}

inline bool pbh_detectable(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& C,
                           double rank_tol) {
  return pbh_stabilizable(A.transpose(), C.transpose(), rank_tol);
}

}  // namespace dlqg
