#pragma once

// Second-layer estimation/control pair.
//
// Given the centralized predictor (P, K), the centralized estimate z = x̂ obeys
//   z(t+1) = A z + B u + ω,   y1 = C1 z + ν,   ω = K(Cx̃ + v),  ν = C1x̃ + v1
// with white (ω, ν) of covariance [[Wc, Uc], [Ucᵀ, Vc]]. The estimate ẑ of z from y1 and the
// correction ũ2 = −L2 (z − ẑ) are then tied together through
//   P1  = Ā P1 Āᵀ + Wc − K1Ucᵀ − UcK1ᵀ + K1VcK1ᵀ,            Ā = A − K1C1 − B2L2
//   Π2  = Āᵀ Π2 Ā + Q − L2ᵀS2ᵀ − S2L2 + L2ᵀR22L2
//   K1  = ((A − B2L2) P1 C1ᵀ + Uc)(C1P1C1ᵀ + Vc)⁻¹
//   L2  = (B2ᵀΠ2B2 + R22)⁻¹ ((A − K1C1)ᵀ Π2 B2 + S2)ᵀ
// which is solved by alternating the two standard DAREs.

#include <vector>

#include "dlqg/core.hpp"
#include "dlqg/riccati.hpp"

namespace dlqg {

/// Covariance of (ω, ν).
struct ScriptNoise {
  Matrix Wc;  // n×n
  Matrix Uc;  // n×p1
  Matrix Vc;  // p1×p1

  Matrix joint() const {
    Matrix N(Wc.rows() + Vc.rows(), Wc.cols() + Vc.cols());
    N << Wc, Uc, Uc.transpose(), Vc;
    return N;
  }
};

/// Wc = K(CPCᵀ + V)Kᵀ,  Uc = K(CPC1ᵀ + V1),  Vc = C1PC1ᵀ + V11.
inline ScriptNoise build_script_noise(const Eigen::Ref<const Matrix>& P, const Eigen::Ref<const Matrix>& K,
                                      const PartitionedSystem& system, const NoiseModel& noise) {
  const BlockDims& d = system.dims;
  const int n = d.n(), p = d.p();
  if (P.rows() != n || P.cols() != n) throw DimensionError("P", "must be n×n");
  if (K.rows() != n || K.cols() != p) throw DimensionError("K", "must be n×p");
  const Matrix& C = system.C;
  const auto C1 = system.C1();
  ScriptNoise s;
  s.Wc = symmetrized(K * (C * P * C.transpose() + noise.V) * K.transpose());
  s.Uc = K * (C * P * C1.transpose() + noise.V1(d));
  s.Vc = symmetrized(C1 * P * C1.transpose() + noise.V11(d));
  return s;
}

struct CoupledOptions {
  double tol = 1e-9;
  int max_iter = 200;
  double damping = 1.0;  // L2 ← (1 − d)·L2_prev + d·L2_new
  DareOptions dare{};
};

struct CoupledSolution {
  Matrix P1;
  Matrix Pi2;
  Matrix K1;  // n×p1
  Matrix L2;  // m2×n
  int iterations = 0;
  double final_step_size = 0.0;
  std::vector<double> step_sizes;
  double radius_est = 0.0;  // ρ(A − K1C1 − B2L2)
  double residual_P1 = 0.0;
  double residual_Pi2 = 0.0;
};

/// K1 from (P1, L2).
inline Matrix coupled_estimation_gain(const PartitionedSystem& sys, const ScriptNoise& script,
                                      const Eigen::Ref<const Matrix>& P1, const Eigen::Ref<const Matrix>& L2) {
  const Matrix A_bar = sys.A - sys.B2() * L2;
  return estimation_gain(A_bar, sys.C1(), script.Uc, script.Vc, P1);
}

/// L2 from (Π2, K1).
inline Matrix coupled_control_gain(const PartitionedSystem& sys, const CostModel& cost,
                                   const Eigen::Ref<const Matrix>& Pi2, const Eigen::Ref<const Matrix>& K1) {
  const BlockDims& d = sys.dims;
  const Matrix A_bar = sys.A - K1 * sys.C1();
  return control_gain(A_bar, sys.B2(), cost.S2(d), cost.R22(d), Pi2);
}

/// Relative residual of the P1 equation at (P1, K1, L2).
inline double coupled_residual_P1(const PartitionedSystem& sys, const ScriptNoise& script,
                                  const Eigen::Ref<const Matrix>& P1, const Eigen::Ref<const Matrix>& K1,
                                  const Eigen::Ref<const Matrix>& L2) {
  const Matrix A_bar = sys.A - sys.B2() * L2;
  return relative_difference(P1, estimation_riccati_rhs(A_bar, sys.C1(), script.Wc, script.Uc, script.Vc, P1, K1));
}

/// Relative residual of the Π2 equation at (Π2, K1, L2).
inline double coupled_residual_Pi2(const PartitionedSystem& sys, const CostModel& cost,
                                   const Eigen::Ref<const Matrix>& Pi2, const Eigen::Ref<const Matrix>& K1,
                                   const Eigen::Ref<const Matrix>& L2) {
  const BlockDims& d = sys.dims;
  const Matrix A_bar = sys.A - K1 * sys.C1();
  return relative_difference(Pi2, control_riccati_rhs(A_bar, sys.B2(), cost.Q, cost.S2(d), cost.R22(d), Pi2, L2));
}

/// Starting L2 for the alternation: the last m2 rows of the centralized L, unless they leave
/// A22 − B22·L2 unstable. That block is invisible to y1, so no stabilizing P1 exists there, and
/// the start falls back to [0 | L22] with L22 the LQ gain of subsystem 2 alone.
struct CoupledStart {
  Matrix L2;
  bool fallback = false;
};

inline CoupledStart coupled_start(const PartitionedSystem& sys, const CostModel& cost,
                                  const Eigen::Ref<const Matrix>& L, const DareOptions& dare = {}) {
  const BlockDims& d = sys.dims;
  if (L.rows() != d.m() || L.cols() != d.n()) throw DimensionError("L", "must be m×n");
  CoupledStart start{L.bottomRows(d.m2), false};
  const Matrix A22 = sys.A.bottomRightCorner(d.n2, d.n2);
  const Matrix B22 = sys.B.bottomRightCorner(d.n2, d.m2);
  if (spectral_radius(A22 - B22 * start.L2.rightCols(d.n2)) < 1.0) return start;

  const Matrix S22 = cost.S2(d).bottomRows(d.n2);
  const ControlDareSolution sub = solve_control_dare(A22, B22, cost.Q.bottomRightCorner(d.n2, d.n2), S22,
                                                     cost.R22(d), dare);
  start.L2.setZero();
  start.L2.rightCols(d.n2) = sub.L;
  start.fallback = true;
  return start;
}

/// Gauss–Seidel iteration over the two half-problems, warm-started at L2 = initial_L2
/// (normally the last m2 rows of the centralized gain L).
///
/// Throws ConvergenceError carrying the step history if the gains do not settle, and
/// rethrows inner DARE failures with the outer iteration index prepended.
inline CoupledSolution solve_coupled(const PartitionedSystem& sys, const CostModel& cost, const ScriptNoise& script,
                                     const Eigen::Ref<const Matrix>& initial_L2, const CoupledOptions& opts = {}) {
  const BlockDims& d = sys.dims;
  if (initial_L2.rows() != d.m2 || initial_L2.cols() != d.n()) throw DimensionError("L2", "must be m2×n");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw Error("solve_coupled: damping must lie in (0, 1]");

  const Matrix C1 = sys.C1();
  const Matrix B2 = sys.B2();
  const Matrix S2 = cost.S2(d);
  const Matrix R22 = cost.R22(d);

  CoupledSolution sol;
  Matrix L2 = initial_L2;
  Matrix K1 = Matrix::Zero(d.n(), d.p1);
  double step = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    EstimationDareSolution est;
    ControlDareSolution ctl;
    try {
      est = solve_estimation_dare(sys.A - B2 * L2, C1, script.Wc, script.Uc, script.Vc, opts.dare);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("solve_coupled iteration " + std::to_string(it) + ", P1 step: " + e.detail(),
                             e.last_residual(), sol.step_sizes);
    } catch (const InstabilityError& e) {
      throw InstabilityError("solve_coupled iteration " + std::to_string(it) + ", P1 step: " + e.detail(), e.radius());
    }
    try {
      ctl = solve_control_dare(sys.A - est.K * C1, B2, cost.Q, S2, R22, opts.dare);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("solve_coupled iteration " + std::to_string(it) + ", Pi2 step: " + e.detail(),
                             e.last_residual(), sol.step_sizes);
    } catch (const InstabilityError& e) {
      throw InstabilityError("solve_coupled iteration " + std::to_string(it) + ", Pi2 step: " + e.detail(), e.radius());
    }
    const Matrix L2_next = (1.0 - opts.damping) * L2 + opts.damping * ctl.L;
    const double scale = std::max({1.0, est.K.norm(), L2_next.norm()});
    step = std::max((est.K - K1).norm(), (L2_next - L2).norm()) / scale;
    sol.step_sizes.push_back(step);
    K1 = est.K;
    L2 = L2_next;
    sol.P1 = est.P;
    sol.Pi2 = ctl.Pi;
    sol.iterations = it;
    if (step <= opts.tol) break;
  }
  sol.final_step_size = step;
  if (!(step <= opts.tol))
    throw ConvergenceError("solve_coupled: no convergence after " + std::to_string(opts.max_iter) + " iterations",
                           step, sol.step_sizes);

  // Close the last half-step so (P1, K1) match the reported L2, then certify by substitution.
  const EstimationDareSolution est = solve_estimation_dare(sys.A - B2 * L2, C1, script.Wc, script.Uc, script.Vc, opts.dare);
  sol.P1 = est.P;
  sol.K1 = est.K;
  sol.L2 = L2;
  if (opts.damping == 1.0) {
    // Polish: extra undamped sweeps until K1 and L2 reproduce each other.
    for (int k = 0; k < 20; ++k) {
      const ControlDareSolution ctl = solve_control_dare(sys.A - sol.K1 * C1, B2, cost.Q, S2, R22, opts.dare);
      sol.Pi2 = ctl.Pi;
      const double moved = relative_difference(ctl.L, sol.L2);
      sol.L2 = ctl.L;
      if (moved <= 1e-13) break;
      const EstimationDareSolution e =
          solve_estimation_dare(sys.A - B2 * sol.L2, C1, script.Wc, script.Uc, script.Vc, opts.dare);
      sol.P1 = e.P;
      sol.K1 = e.K;
    }
  }
  sol.radius_est = spectral_radius(sys.A - sol.K1 * C1 - B2 * sol.L2);
  sol.residual_P1 = coupled_residual_P1(sys, script, sol.P1, sol.K1, sol.L2);
  sol.residual_Pi2 = coupled_residual_Pi2(sys, cost, sol.Pi2, sol.K1, sol.L2);

  const double certify = 10.0 * std::max(opts.tol, opts.dare.tol);
  if (!(sol.residual_P1 <= certify && sol.residual_Pi2 <= certify))
    throw ConvergenceError("solve_coupled: converged gains fail residual certification",
                           std::max(sol.residual_P1, sol.residual_Pi2), sol.step_sizes);
  if (!(sol.radius_est < 1.0))
    throw InstabilityError("solve_coupled: A − K1C1 − B2L2 is not stable", sol.radius_est);
  return sol;
}

}  // namespace dlqg
