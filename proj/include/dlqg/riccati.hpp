#pragma once

// Discrete algebraic Riccati and Lyapunov solvers.
//
// Control form (cross weight S):
//   Π = (A − BL)ᵀ Π (A − BL) + Q − LᵀSᵀ − SL + LᵀRL,   L = (BᵀΠB + R)⁻¹ (AᵀΠB + S)ᵀ
// Estimation form (cross covariance U), the dual of the above:
//   P = (A − KC) P (A − KC)ᵀ + W − KUᵀ − UKᵀ + KVKᵀ,   K = (APCᵀ + U)(CPCᵀ + V)⁻¹
//
// The stabilizing solution is found with the structured doubling algorithm, polished with
// Newton (Hewer) steps, and certified by substituting back into the equation above.

#include <string>

#include "dlqg/error.hpp"
#include "dlqg/linalg.hpp"

namespace dlqg {

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct LyapunovOptions {
  double tol = 1e-11;
};

struct ControlDareSolution {
  Matrix Pi;
  Matrix L;
  double closed_loop_radius = 0.0;  // ρ(A − BL)
  double residual = 0.0;
};

struct EstimationDareSolution {
  Matrix P;
  Matrix K;
  double closed_loop_radius = 0.0;  // ρ(A − KC)
  double residual = 0.0;
};

/// L = (BᵀΠB + R)⁻¹ (AᵀΠB + S)ᵀ
inline Matrix control_gain(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                           const Eigen::Ref<const Matrix>& S, const Eigen::Ref<const Matrix>& R,
                           const Eigen::Ref<const Matrix>& Pi) {
  const Matrix lhs = B.transpose() * Pi * B + R;
  const Matrix rhs = (A.transpose() * Pi * B + S).transpose();
  return lhs.ldlt().solve(rhs);
}

/// K = (APCᵀ + U)(CPCᵀ + V)⁻¹
inline Matrix estimation_gain(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& C,
                              const Eigen::Ref<const Matrix>& U, const Eigen::Ref<const Matrix>& V,
                              const Eigen::Ref<const Matrix>& P) {
  const Matrix innov = C * P * C.transpose() + V;
  const Matrix cross = A * P * C.transpose() + U;
  return innov.ldlt().solve(cross.transpose()).transpose();
}

/// Right-hand side of the control form for a given (Π, L).
inline Matrix control_riccati_rhs(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                                  const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& S,
                                  const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Pi,
                                  const Eigen::Ref<const Matrix>& L) {
  const Matrix Acl = A - B * L;
  return Acl.transpose() * Pi * Acl + Q - L.transpose() * S.transpose() - S * L + L.transpose() * R * L;
}

/// Right-hand side of the estimation form for a given (P, K).
inline Matrix estimation_riccati_rhs(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& C,
                                     const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Matrix>& U,
                                     const Eigen::Ref<const Matrix>& V, const Eigen::Ref<const Matrix>& P,
                                     const Eigen::Ref<const Matrix>& K) {
  const Matrix Acl = A - K * C;
  return Acl * P * Acl.transpose() + W - K * U.transpose() - U * K.transpose() + K * V * K.transpose();
}

/// Relative residual of the control form with L recomputed from Π.
inline double control_dare_residual(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                                    const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& S,
                                    const Eigen::Ref<const Matrix>& R, const Eigen::Ref<const Matrix>& Pi) {
  const Matrix L = control_gain(A, B, S, R, Pi);
  return relative_difference(Pi, control_riccati_rhs(A, B, Q, S, R, Pi, L));
}

/// Solves X = A·X·Aᵀ + Sigma for Schur-stable A.
inline Matrix solve_dlyap(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& Sigma,
                          const LyapunovOptions& opts = {}) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw DimensionError("A", "Lyapunov matrix must be square");
  if (Sigma.rows() != n || Sigma.cols() != n) throw DimensionError("Sigma", "must match A");
  if (n == 0) return Matrix(0, 0);
  const double rho = spectral_radius(A);
  if (!(rho < 1.0)) throw InstabilityError("solve_dlyap: A is not Schur stable", rho);

  auto residual_of = [&](const Matrix& X) -> Matrix { return A * X * A.transpose() + Sigma - X; };

  // One linear solve of E = A·E·Aᵀ + rhs, by Kronecker factorization for small n and
  // squared Smith iteration otherwise.
  Eigen::PartialPivLU<Matrix> kron_lu;
  const bool use_kron = n <= 24;
  if (use_kron) {
    const Eigen::Index nn = n * n;
    Matrix K = Matrix::Identity(nn, nn);
    // vec(A X Aᵀ) = (A ⊗ A) vec(X), column-major vec.
    for (Eigen::Index j1 = 0; j1 < n; ++j1)
      for (Eigen::Index i1 = 0; i1 < n; ++i1) {
        const double a = A(i1, j1);
        if (a == 0.0) continue;
        K.block(i1 * n, j1 * n, n, n) -= a * A;
      }
    kron_lu.compute(K);
  }
  auto linear_solve = [&](const Matrix& rhs) -> Matrix {
    if (use_kron) {
      const Eigen::Map<const Vector> b(rhs.data(), rhs.size());
      Vector x = kron_lu.solve(b);
      return Eigen::Map<Matrix>(x.data(), n, n);
    }
    Matrix X = rhs;
    Matrix Ak = A;
    for (int k = 0; k < 200; ++k) {
      const Matrix term = Ak * X * Ak.transpose();
      X += term;
      Ak = Ak * Ak;
      if (max_abs(term) <= 1e-17 * std::max(1.0, max_abs(X)) || max_abs(Ak) < 1e-300) break;
    }
    return X;
  };

  Matrix X = symmetrized(linear_solve(Sigma));
  double res = relative_difference(X, X + residual_of(X));
  for (int refine = 0; refine < 3 && res > 0.1 * opts.tol; ++refine) {
    X = symmetrized(X + linear_solve(residual_of(X)));
    res = relative_difference(X, X + residual_of(X));
  }
  if (res > opts.tol) throw ConvergenceError("solve_dlyap: residual above tolerance", res);
  return X;
}

namespace detail {

// Structured doubling for X = AᵀX(I + GX)⁻¹A + H with G, H symmetric PSD.
inline bool sda(Matrix A, Matrix G, Matrix H, int max_iter, Matrix& X) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  for (int k = 0; k < std::min(max_iter, 100); ++k) {
    Eigen::PartialPivLU<Matrix> lu(I + G * H);
    const Matrix WA = lu.solve(A);
    const Matrix WG = lu.solve(G);
    const Matrix H_next = symmetrized(H + A.transpose() * H * WA);
    const Matrix G_next = symmetrized(G + A * WG * A.transpose());
    const Matrix A_next = A * WA;
    if (!H_next.allFinite()) return false;
    const double change = (H_next - H).norm();
    H = H_next;
    G = G_next;
    A = A_next;
    if (change <= 1e-15 * std::max(1.0, H.norm())) break;
  }
  X = H;
  return true;
}

}  // namespace detail

/// Stabilizing solution of the control-form DARE.
inline ControlDareSolution solve_control_dare(const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Matrix>& B,
                                              const Eigen::Ref<const Matrix>& Q, const Eigen::Ref<const Matrix>& S,
                                              const Eigen::Ref<const Matrix>& R, const DareOptions& opts = {}) {
  const Eigen::Index n = A.rows(), m = B.cols();
  if (A.cols() != n) throw DimensionError("A", "must be square");
  if (B.rows() != n) throw DimensionError("B", "row count must match A");
  if (Q.rows() != n || Q.cols() != n) throw DimensionError("Q", "must be n×n");
  if (S.rows() != n || S.cols() != m) throw DimensionError("S", "must be n×m");
  if (R.rows() != m || R.cols() != m) throw DimensionError("R", "must be m×m");

  Eigen::LLT<Matrix> r_llt(symmetrized(R));
  if (r_llt.info() != Eigen::Success || min_sym_eigenvalue(R) <= 0.0)
    throw DefinitenessError("solve_control_dare: R is not positive definite");

  // Remove the cross weight: u = v − R⁻¹Sᵀx.
  const Matrix RinvSt = r_llt.solve(S.transpose());
  const Matrix As = A - B * RinvSt;
  const Matrix Qs = symmetrized(Q - S * RinvSt);
  const Matrix G = symmetrized(B * r_llt.solve(B.transpose()));

  Matrix Pi;
  const bool sda_ok = detail::sda(As, G, Qs, opts.max_iter, Pi);
  if (!sda_ok) Pi = symmetrized(Q);

  auto residual = [&](const Matrix& X) { return control_dare_residual(A, B, Q, S, R, X); };
  double res = residual(Pi);

  // Newton (Hewer) polish from a stabilizing gain.
  for (int k = 0; k < 8 && res > 0.01 * opts.tol; ++k) {
    const Matrix L = control_gain(A, B, S, R, Pi);
    const Matrix Acl = A - B * L;
    if (!(spectral_radius(Acl) < 1.0)) break;
    const Matrix stage = Q - L.transpose() * S.transpose() - S * L + L.transpose() * R * L;
    Matrix next;
    try {
      next = solve_dlyap(Acl.transpose(), symmetrized(stage), LyapunovOptions{1e-3});
    } catch (const Error&) {
      break;
    }
    const double next_res = residual(next);
    if (!(next_res < res)) break;
    Pi = next;
    res = next_res;
  }

  // Fall back to the plain Riccati map, which converges monotonically from any PSD start
  // under stabilizability and detectability.
  int iter = 0;
  while (res > opts.tol && iter < opts.max_iter) {
    const Matrix L = control_gain(A, B, S, R, Pi);
    Pi = symmetrized(control_riccati_rhs(A, B, Q, S, R, Pi, L));
    res = residual(Pi);
    ++iter;
  }
  if (!(res <= opts.tol)) throw ConvergenceError("solve_control_dare: no convergence", res);

  ControlDareSolution sol;
  sol.Pi = Pi;
  sol.L = control_gain(A, B, S, R, Pi);
  sol.closed_loop_radius = spectral_radius(A - B * sol.L);
  sol.residual = res;
  if (!(sol.closed_loop_radius < 1.0))
    throw InstabilityError("solve_control_dare: solution is not stabilizing", sol.closed_loop_radius);
  return sol;
}

/// Stabilizing solution of the estimation-form DARE, via duality with the control form.
inline EstimationDareSolution solve_estimation_dare(const Eigen::Ref<const Matrix>& A,
                                                    const Eigen::Ref<const Matrix>& C,
                                                    const Eigen::Ref<const Matrix>& W,
                                                    const Eigen::Ref<const Matrix>& U,
                                                    const Eigen::Ref<const Matrix>& V,
                                                    const DareOptions& opts = {}) {
  if (C.cols() != A.rows()) throw DimensionError("C", "column count must match A");
  if (U.rows() != A.rows() || U.cols() != C.rows()) throw DimensionError("U", "must be n×p");
  ControlDareSolution dual;
  try {
    dual = solve_control_dare(A.transpose(), C.transpose(), W, U, V, opts);
  } catch (const DefinitenessError&) {
    throw DefinitenessError("solve_estimation_dare: V is not positive definite");
  }
  EstimationDareSolution sol;
  sol.P = dual.Pi;
  sol.K = dual.L.transpose();
  sol.closed_loop_radius = dual.closed_loop_radius;
  sol.residual = relative_difference(sol.P, estimation_riccati_rhs(A, C, W, U, V, sol.P, sol.K));
  return sol;
}

}  // namespace dlqg
