#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dlqg/dlqg.hpp"

namespace fixtures {

using dlqg::BlockDims;
using dlqg::Matrix;
using dlqg::ProblemInstance;

inline const BlockDims kScalarBlocks{1, 1, 1, 1, 1, 1};

// Dimension schedule for the 50-instance sweep; seed s uses entry (s − 1) mod 10.
inline const std::vector<BlockDims>& sweep_dims() {
  static const std::vector<BlockDims> dims = {
      {1, 1, 1, 1, 1, 1}, {2, 1, 1, 1, 1, 1}, {1, 2, 1, 1, 1, 1}, {2, 2, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2},
      {3, 3, 2, 2, 2, 2}, {3, 2, 2, 1, 1, 2}, {2, 3, 1, 2, 2, 1}, {3, 3, 1, 3, 3, 1}, {3, 3, 3, 1, 1, 3}};
  return dims;
}

inline ProblemInstance sweep_instance(int seed) {
  return dlqg::random_instance(seed, sweep_dims()[(seed - 1) % sweep_dims().size()], 0.8);
}

// Reference instances for the oracle comparison: n1 = n2 ≤ 2, seed s uses entry (s − 1) mod 3.
inline ProblemInstance oracle_instance(int seed) {
  static const std::vector<BlockDims> dims = {{1, 1, 1, 1, 1, 1}, {2, 2, 1, 1, 1, 1}, {2, 2, 2, 2, 2, 2}};
  return dlqg::random_instance(seed, dims[(seed - 1) % dims.size()], 0.8);
}

inline ProblemInstance seed7() { return dlqg::random_instance(7, kScalarBlocks, 0.9); }

inline ProblemInstance seed11_decoupled() {
  return dlqg::decoupled(dlqg::random_instance(11, {2, 2, 1, 1, 1, 1}, 0.8));
}

// A = [[0.5, 0], [0.3, 0.4]], identities elsewhere.
inline ProblemInstance small_valid() {
  ProblemInstance inst;
  inst.system.dims = kScalarBlocks;
  inst.system.A = (Matrix(2, 2) << 0.5, 0.0, 0.3, 0.4).finished();
  inst.system.B = Matrix::Identity(2, 2);
  inst.system.C = Matrix::Identity(2, 2);
  inst.noise.W = Matrix::Identity(2, 2);
  inst.noise.U = Matrix::Zero(2, 2);
  inst.noise.V = Matrix::Identity(2, 2);
  inst.cost.Q = Matrix::Identity(2, 2);
  inst.cost.S = Matrix::Zero(2, 2);
  inst.cost.R = Matrix::Identity(2, 2);
  return inst;
}

inline Matrix rotation(double radians) {
  return (Matrix(2, 2) << std::cos(radians), -std::sin(radians), std::sin(radians), std::cos(radians)).finished();
}

// Positive root of x² − 0.25x − 1 = 0.
inline double scalar_riccati_root() { return (0.25 + std::sqrt(4.0625)) / 2.0; }

// Σ_k Aᵏ Σ (Aᵏ)ᵀ until the terms drop below `floor`.
inline Matrix lyapunov_series(const Matrix& A, const Matrix& Sigma, double floor = 1e-18) {
  Matrix X = Matrix::Zero(A.rows(), A.cols());
  Matrix term = Sigma;
  for (int k = 0; k < 100000; ++k) {
    X += term;
    if (term.norm() < floor) break;
    term = A * term * A.transpose();
  }
  return X;
}

// Stationary cost of single-system LQG with a one-step predictor and S = U = 0:
// tr(Q·P) + tr(Π·K(CPCᵀ + V)Kᵀ).
inline double single_system_lqg_cost(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& W,
                                     const Matrix& V, const Matrix& Q, const Matrix& R) {
  const auto est = dlqg::solve_estimation_dare(A, C, W, Matrix::Zero(A.rows(), C.rows()), V);
  const auto ctl = dlqg::solve_control_dare(A, B, Q, Matrix::Zero(A.rows(), B.cols()), R);
  const Matrix innovation = est.K * (C * est.P * C.transpose() + V) * est.K.transpose();
  return (Q * est.P).trace() + (ctl.Pi * innovation).trace();
}

// Sum of the two subsystem costs of a decoupled instance.
inline double decoupled_cost_oracle(const ProblemInstance& inst) {
  const BlockDims& d = inst.dims();
  const auto& s = inst.system;
  const double J1 = single_system_lqg_cost(
      s.A.topLeftCorner(d.n1, d.n1), s.B.topLeftCorner(d.n1, d.m1), s.C.topLeftCorner(d.p1, d.n1),
      inst.noise.W.topLeftCorner(d.n1, d.n1), inst.noise.V.topLeftCorner(d.p1, d.p1),
      inst.cost.Q.topLeftCorner(d.n1, d.n1), inst.cost.R.topLeftCorner(d.m1, d.m1));
  const double J2 = single_system_lqg_cost(
      s.A.bottomRightCorner(d.n2, d.n2), s.B.bottomRightCorner(d.n2, d.m2), s.C.bottomRightCorner(d.p2, d.n2),
      inst.noise.W.bottomRightCorner(d.n2, d.n2), inst.noise.V.bottomRightCorner(d.p2, d.p2),
      inst.cost.Q.bottomRightCorner(d.n2, d.n2), inst.cost.R.bottomRightCorner(d.m2, d.m2));
  return J1 + J2;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace fixtures
