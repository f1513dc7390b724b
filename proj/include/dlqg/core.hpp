#pragma once

// Problem data model for two lower-triangularly interconnected subsystems.
//
// Block convention: subsystem 1 owns the leading n1 states, m1 inputs and p1 outputs;
// subsystem 2 owns the trailing n2, m2, p2. Subsystem 1 may influence subsystem 2 but
// not the reverse, so the upper-right block of A, B and C is zero.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dlqg/error.hpp"
#include "dlqg/linalg.hpp"

namespace dlqg {

struct BlockDims {
  int n1 = 1, n2 = 1;
  int m1 = 1, m2 = 1;
  int p1 = 1, p2 = 1;

  int n() const { return n1 + n2; }
  int m() const { return m1 + m2; }
  int p() const { return p1 + p2; }
  bool valid() const { return n1 >= 1 && n2 >= 1 && m1 >= 1 && m2 >= 1 && p1 >= 1 && p2 >= 1; }

  friend bool operator==(const BlockDims&, const BlockDims&) = default;
};

struct PartitionedSystem {
  Matrix A;  // n×n
  Matrix B;  // n×m
  Matrix C;  // p×n
  BlockDims dims;

  auto C1() const { return C.topRows(dims.p1); }
  auto C2() const { return C.bottomRows(dims.p2); }
  auto B1() const { return B.leftCols(dims.m1); }
  auto B2() const { return B.rightCols(dims.m2); }
};

/// Covariances of the joint white noise [w; v]: E[wwᵀ] = W, E[wvᵀ] = U, E[vvᵀ] = V.
struct NoiseModel {
  Matrix W;  // n×n
  Matrix U;  // n×p
  Matrix V;  // p×p

  /// First block column of V (p×p1).
  auto V1(const BlockDims& d) const { return V.leftCols(d.p1); }
  auto V11(const BlockDims& d) const { return V.topLeftCorner(d.p1, d.p1); }

  Matrix joint() const {
    Matrix N(W.rows() + V.rows(), W.cols() + V.cols());
    N << W, U, U.transpose(), V;
    return N;
  }
};

/// Stage cost [x; u]ᵀ [[Q, S], [Sᵀ, R]] [x; u].
struct CostModel {
  Matrix Q;  // n×n
  Matrix S;  // n×m
  Matrix R;  // m×m

  /// Last block column of S, i.e. [S12; S22] (n×m2).
  auto S2(const BlockDims& d) const { return S.rightCols(d.m2); }
  auto R22(const BlockDims& d) const { return R.bottomRightCorner(d.m2, d.m2); }

  Matrix joint() const {
    Matrix M(Q.rows() + R.rows(), Q.cols() + R.cols());
    M << Q, S, S.transpose(), R;
    return M;
  }
};

struct ProblemInstance {
  PartitionedSystem system;
  NoiseModel noise;
  CostModel cost;

  const BlockDims& dims() const { return system.dims; }
};

inline bool operator==(const ProblemInstance& a, const ProblemInstance& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return a.dims() == b.dims() && same(a.system.A, b.system.A) && same(a.system.B, b.system.B) &&
         same(a.system.C, b.system.C) && same(a.noise.W, b.noise.W) && same(a.noise.U, b.noise.U) &&
         same(a.noise.V, b.noise.V) && same(a.cost.Q, b.cost.Q) && same(a.cost.S, b.cost.S) &&
         same(a.cost.R, b.cost.R);
}

/// Numerical thresholds used by validation.
struct Tolerances {
  double symmetry = 1e-12;      // relative to max(1, max|entry|)
  double definiteness = 1e-10;  // minimum eigenvalue for "positive definite"
  double psd_slack = 1e-10;     // minimum eigenvalue ≥ −psd_slack for "positive semidefinite"
  double rank = 1e-9;           // PBH rank test
};

struct Violation {
  std::string code;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const {
    for (const auto& v : violations)
      if (v.code == code) return true;
    return false;
  }
};

namespace detail {

inline void require_shape(const std::string& name, const Matrix& M, Eigen::Index rows, Eigen::Index cols) {
  if (M.rows() != rows || M.cols() != cols)
    throw DimensionError(name, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                                   std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

}  // namespace detail

/// Throws DimensionError if any matrix disagrees with the block dimensions. Dims must be valid.
inline void check_shapes(const ProblemInstance& inst) {
  const BlockDims& d = inst.dims();
  const int n = d.n(), m = d.m(), p = d.p();
  detail::require_shape("A", inst.system.A, n, n);
  detail::require_shape("B", inst.system.B, n, m);
  detail::require_shape("C", inst.system.C, p, n);
  detail::require_shape("W", inst.noise.W, n, n);
  detail::require_shape("U", inst.noise.U, n, p);
  detail::require_shape("V", inst.noise.V, p, p);
  detail::require_shape("Q", inst.cost.Q, n, n);
  detail::require_shape("S", inst.cost.S, n, m);
  detail::require_shape("R", inst.cost.R, m, m);
}

/// Lists every violated admissibility condition. Empty iff the instance is admissible.
/// Throws DimensionError on shape mismatch.
inline ValidationReport validate(const ProblemInstance& inst, const Tolerances& tol = {}) {
  ValidationReport report;
  const BlockDims& d = inst.dims();
  if (!d.valid()) {
    report.violations.push_back({"dims", "dims must be >= 1"});
    return report;
  }
  check_shapes(inst);

  const auto& sys = inst.system;
  const std::pair<const char*, const Matrix*> all[] = {
      {"A", &sys.A},          {"B", &sys.B},          {"C", &sys.C},
      {"W", &inst.noise.W},   {"U", &inst.noise.U},   {"V", &inst.noise.V},
      {"Q", &inst.cost.Q},    {"S", &inst.cost.S},    {"R", &inst.cost.R}};
  bool finite = true;
  for (const auto& [name, M] : all) {
    if (!detail::all_finite(*M)) {
      report.violations.push_back({"finite", std::string("matrix ") + name + " has non-finite entries"});
      finite = false;
    }
  }
  if (!finite) return report;

  // Exact zeros: the blocks are constructed, never computed.
  if (!sys.A.topRightCorner(d.n1, d.n2).isZero(0.0))
    report.violations.push_back({"sparsity.A", "sparsity: A block (1,2) nonzero"});
  if (!sys.B.topRightCorner(d.n1, d.m2).isZero(0.0))
    report.violations.push_back({"sparsity.B", "sparsity: B block (1,2) nonzero"});
  if (!sys.C.topRightCorner(d.p1, d.n2).isZero(0.0))
    report.violations.push_back({"sparsity.C", "sparsity: C block (1,2) nonzero"});

  const Matrix noise = inst.noise.joint();
  if (!is_symmetric(noise, tol.symmetry))
    report.violations.push_back({"noise.symmetry", "noise covariance [[W,U],[U',V]] not symmetric"});
  else if (min_sym_eigenvalue(noise) < -tol.psd_slack)
    report.violations.push_back({"noise.psd", "noise covariance [[W,U],[U',V]] not positive semidefinite"});
  if (min_sym_eigenvalue(inst.noise.V) < tol.definiteness)
    report.violations.push_back({"noise.V", "measurement noise covariance V not positive definite"});

  const Matrix cost = inst.cost.joint();
  if (!is_symmetric(cost, tol.symmetry))
    report.violations.push_back({"cost.symmetry", "cost matrix [[Q,S],[S',R]] not symmetric"});
  else if (min_sym_eigenvalue(cost) < tol.definiteness)
    report.violations.push_back({"cost.pd", "cost matrix not positive definite"});

  if (!pbh_stabilizable(sys.A, sys.B, tol.rank))
    report.violations.push_back({"stabilizability", "(A,B) not stabilizable"});
  if (!pbh_detectable(sys.A, sys.C, tol.rank))
    report.violations.push_back({"detectability", "(A,C) not detectable"});
  return report;
}

/// Random admissible instance for tests and experiments. Deterministic in its arguments.
///
/// A is Gaussian with the forbidden block zeroed and rescaled to the requested spectral
/// radius. Noise and cost blocks are GᵀG + 1e-3·I. Draws that fail validation (possible
/// only for spectral_target ≥ 1) are discarded and redrawn from the same stream.
inline ProblemInstance random_instance(std::uint64_t seed, const BlockDims& dims, double spectral_target) {
  if (!dims.valid()) throw ValidationError("dims must be >= 1");
  if (!(spectral_target > 0.0 && spectral_target < 2.0))
    throw ValidationError("spectral_target must lie in (0, 2)");

  const int n = dims.n(), m = dims.m(), p = dims.p();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](int r, int c) {
    Matrix M(r, c);
    // Column-major fill order is part of the determinism contract.
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) M(i, j) = normal(rng);
    return M;
  };
  auto gram = [&](int k) {
    const Matrix G = gaussian(k, k);
    return Matrix(G.transpose() * G + 1e-3 * Matrix::Identity(k, k));
  };

  for (int attempt = 0; attempt < 1000; ++attempt) {
    ProblemInstance inst;
    inst.system.dims = dims;
    Matrix A = gaussian(n, n);
    A.topRightCorner(dims.n1, dims.n2).setZero();
    const double rho = spectral_radius(A);
    if (rho < 1e-8) continue;
    A *= spectral_target / rho;
    inst.system.A = A;
    inst.system.B = gaussian(n, m);
    inst.system.B.topRightCorner(dims.n1, dims.m2).setZero();
    inst.system.C = gaussian(p, n);
    inst.system.C.topRightCorner(dims.p1, dims.n2).setZero();

    const Matrix N = gram(n + p);
    inst.noise.W = N.topLeftCorner(n, n);
    inst.noise.U = N.topRightCorner(n, p);
    inst.noise.V = N.bottomRightCorner(p, p);
    const Matrix M = gram(n + m);
    inst.cost.Q = M.topLeftCorner(n, n);
    inst.cost.S = M.topRightCorner(n, m);
    inst.cost.R = M.bottomRightCorner(m, m);

    if (validate(inst).ok()) return inst;
  }
  throw ValidationError("random_instance: no admissible draw after 1000 attempts");
}

/// Removes every coupling between the subsystems: A21, B21, C21, U and S are zeroed and
/// W, V, Q, R are made block diagonal. The result is two independent LQG problems.
inline ProblemInstance decoupled(ProblemInstance inst) {
  const BlockDims& d = inst.dims();
  inst.system.A.bottomLeftCorner(d.n2, d.n1).setZero();
  inst.system.B.bottomLeftCorner(d.n2, d.m1).setZero();
  inst.system.C.bottomLeftCorner(d.p2, d.n1).setZero();
  inst.noise.U.setZero();
  inst.noise.W.topRightCorner(d.n1, d.n2).setZero();
  inst.noise.W.bottomLeftCorner(d.n2, d.n1).setZero();
  inst.noise.V.topRightCorner(d.p1, d.p2).setZero();
  inst.noise.V.bottomLeftCorner(d.p2, d.p1).setZero();
  inst.cost.S.setZero();
  inst.cost.Q.topRightCorner(d.n1, d.n2).setZero();
  inst.cost.Q.bottomLeftCorner(d.n2, d.n1).setZero();
  inst.cost.R.topRightCorner(d.m1, d.m2).setZero();
  inst.cost.R.bottomLeftCorner(d.m2, d.m1).setZero();
  return inst;
}

}  // namespace dlqg
