#pragma once

// Closed-loop analysis of a plant driven by a strictly proper linear controller.

#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "dlqg/core.hpp"
#include "dlqg/riccati.hpp"
#include "dlqg/synthesis.hpp"

namespace dlqg {

/// Lifted system over ξ = [x; η] driven by [w; v]:
///   ξ(t+1) = Acl·ξ(t) + Bcl·[w; v],   stage cost = ξᵀ·M·ξ.
struct ClosedLoopModel {
  Matrix Acl;       // (n+q)×(n+q)
  Matrix Bcl;       // (n+q)×(n+p)
  Matrix M;         // (n+q)×(n+q)
  Matrix NoiseCov;  // (n+p)×(n+p)
};

inline ClosedLoopModel closed_loop(const ProblemInstance& inst, const ControllerRealization& r) {
  const BlockDims& d = inst.dims();
  const int n = d.n(), m = d.m(), p = d.p(), q = r.q();
  if (r.F.cols() != q) throw DimensionError("F", "must be square");
  if (r.G.rows() != q || r.G.cols() != p) throw DimensionError("G", "must be q×p");
  if (r.H.rows() != m || r.H.cols() != q) throw DimensionError("H", "must be m×q");
  if (r.D.size() != 0 && max_abs(r.D) != 0.0)
    throw Error("closed_loop: controller has direct feedthrough; only strictly proper controllers are supported");

  const auto& sys = inst.system;
  ClosedLoopModel cl;
  cl.Acl = Matrix::Zero(n + q, n + q);
  cl.Acl.topLeftCorner(n, n) = sys.A;
  cl.Acl.topRightCorner(n, q) = sys.B * r.H;
  cl.Acl.bottomLeftCorner(q, n) = r.G * sys.C;
  cl.Acl.bottomRightCorner(q, q) = r.F;

  cl.Bcl = Matrix::Zero(n + q, n + p);
  cl.Bcl.topLeftCorner(n, n).setIdentity();
  cl.Bcl.bottomRightCorner(q, p) = r.G;

  // [x; u] = T·[x; η] with T = [I 0; 0 H].
  Matrix T = Matrix::Zero(n + m, n + q);
  T.topLeftCorner(n, n).setIdentity();
  T.bottomRightCorner(m, q) = r.H;
  cl.M = symmetrized(T.transpose() * inst.cost.joint() * T);
  cl.NoiseCov = inst.noise.joint();
  return cl;
}

/// Stationary covariance of the lifted state.
inline Matrix stationary_covariance(const ClosedLoopModel& cl, const LyapunovOptions& opts = {}) {
  const double rho = spectral_radius(cl.Acl);
  if (!(rho < 1.0)) throw InstabilityError("closed loop is not stable", rho);
  return solve_dlyap(cl.Acl, symmetrized(cl.Bcl * cl.NoiseCov * cl.Bcl.transpose()), opts);
}

/// Long-run average cost, evaluated as trace(M·Σ) at stationarity.
inline double analytic_cost(const ClosedLoopModel& cl, const LyapunovOptions& opts = {}) {
  return (cl.M * stationary_covariance(cl, opts)).trace();
}

/// Cost averaged over t = 0..M−1 from ξ(0) = 0, i.e. the horizon-M counterpart of analytic_cost.
inline double finite_horizon_cost(const ClosedLoopModel& cl, int horizon) {
  if (horizon < 1) throw Error("finite_horizon_cost: horizon must be >= 1");
  const Matrix BNB = symmetrized(cl.Bcl * cl.NoiseCov * cl.Bcl.transpose());
  Matrix Sigma = Matrix::Zero(cl.Acl.rows(), cl.Acl.cols());
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    total += (cl.M * Sigma).trace();
    Sigma = symmetrized(cl.Acl * Sigma * cl.Acl.transpose() + BNB);
  }
  return total / horizon;
}

struct DecompositionReport {
  double J_total = 0.0;
  double J_hat_z = 0.0;    // common-information part: (ẑ, û)
  double J_tilde_z = 0.0;  // correction part: (z̃, ũ)
  double J_tilde_x = 0.0;  // centralized estimation error x̃
  double cross_zhat_ztilde = 0.0;  // max |E[ẑ z̃ᵀ]|
  double cross_zhat_xtilde = 0.0;  // max |E[ẑ x̃ᵀ]|
  double cross_ztilde_xtilde = 0.0;
  double xtilde_vs_P = 0.0;  // ‖Cov(x̃) − P‖ relative

  double sum() const { return J_hat_z + J_tilde_z + J_tilde_x; }
  double max_cross() const { return std::max({cross_zhat_ztilde, cross_zhat_xtilde, cross_ztilde_xtilde}); }
};

/// Splits the stationary cost of the synthesized controller into the three orthogonal
/// contributions of x = ẑ + z̃ + x̃, u = û + ũ.
inline DecompositionReport cost_decomposition(const ProblemInstance& inst, const GainSet& gains,
                                              const LyapunovOptions& opts = {}) {
  const BlockDims& d = inst.dims();
  const int n = d.n(), m = d.m();
  const ControllerRealization r = assemble_realization(gains, inst.system);
  const ClosedLoopModel cl = closed_loop(inst, r);
  const Matrix Sigma = stationary_covariance(cl, opts);

  // Selectors over the lifted state [x; ẑ; z].
  const Matrix I = Matrix::Identity(n, n);
  Matrix sel_zhat = Matrix::Zero(n, 3 * n), sel_ztilde = Matrix::Zero(n, 3 * n), sel_xtilde = Matrix::Zero(n, 3 * n);
  sel_zhat.middleCols(n, n) = I;
  sel_ztilde.middleCols(n, n) = -I;
  sel_ztilde.rightCols(n) = I;
  sel_xtilde.leftCols(n) = I;
  sel_xtilde.rightCols(n) = -I;

  Matrix E2L2 = Matrix::Zero(m, n);
  E2L2.bottomRows(d.m2) = gains.L2;

  // [ẑ; û] and [z̃; ũ] as maps of the lifted state.
  Matrix T_hat(n + m, 3 * n), T_tilde(n + m, 3 * n);
  T_hat << sel_zhat, -gains.L * sel_zhat;
  T_tilde << sel_ztilde, -E2L2 * sel_ztilde;

  const Matrix Mc = inst.cost.joint();
  DecompositionReport rep;
  rep.J_total = (cl.M * Sigma).trace();
  rep.J_hat_z = (Mc * T_hat * Sigma * T_hat.transpose()).trace();
  rep.J_tilde_z = (Mc * T_tilde * Sigma * T_tilde.transpose()).trace();
  const Matrix cov_xtilde = sel_xtilde * Sigma * sel_xtilde.transpose();
  rep.J_tilde_x = (inst.cost.Q * cov_xtilde).trace();
  rep.cross_zhat_ztilde = max_abs(sel_zhat * Sigma * sel_ztilde.transpose());
  rep.cross_zhat_xtilde = max_abs(sel_zhat * Sigma * sel_xtilde.transpose());
  rep.cross_ztilde_xtilde = max_abs(sel_ztilde * Sigma * sel_xtilde.transpose());
  rep.xtilde_vs_P = relative_difference(gains.P, cov_xtilde);
  return rep;
}

struct TraceSummary {
  Vector mean_x, mean_u;
  Matrix cov_x, cov_u;
};

struct SimulationResult {
  double empirical_cost = 0.0;
  TraceSummary summary;
  std::uint64_t seed = 0;
  long long steps = 0;
  int shards = 1;
};

/// Factor F with F·Fᵀ = N for a symmetric PSD N. Uses Cholesky when N is definite, the
/// pivoted LDLᵀ factorization when it is only semidefinite, and a 1e-12 diagonal jitter
/// as a last resort. Throws DefinitenessError if none succeeds.
inline Matrix noise_factor(const Eigen::Ref<const Matrix>& N) {
  const Eigen::Index k = N.rows();
  const Matrix Ns = symmetrized(N);
  Eigen::LLT<Matrix> llt(Ns);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::LDLT<Matrix> ldlt(Ns);
  const double scale = std::max(1.0, max_abs(Ns));
  if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() >= -1e-12 * scale) {
    const Vector sqrt_d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Matrix F = Matrix(ldlt.matrixL()) * sqrt_d.asDiagonal();
    // Ns = Pᵀ L D Lᵀ P.
    F = ldlt.transpositionsP().transpose() * F;
    return F;
  }
  Eigen::LLT<Matrix> jittered(Ns + 1e-12 * Matrix::Identity(k, k));
  if (jittered.info() == Eigen::Success) return jittered.matrixL();
  throw DefinitenessError("noise covariance [[W,U],[U',V]] is not positive semidefinite");
}

namespace detail {

struct ShardAccumulator {
  double cost = 0.0;
  Vector sum_x, sum_u;
  Matrix sum_xx, sum_uu;
  long long steps = 0;
};

inline ShardAccumulator simulate_shard(const ProblemInstance& inst, const ControllerRealization& r,
                                       const Matrix& noise_chol, long long steps, std::mt19937_64 rng) {
  const BlockDims& d = inst.dims();
  const int n = d.n(), m = d.m(), p = d.p(), q = r.q();
  const auto& sys = inst.system;
  const Matrix Mc = inst.cost.joint();
  std::normal_distribution<double> normal(0.0, 1.0);

  ShardAccumulator acc;
  acc.sum_x = Vector::Zero(n);
  acc.sum_u = Vector::Zero(m);
  acc.sum_xx = Matrix::Zero(n, n);
  acc.sum_uu = Matrix::Zero(m, m);
  acc.steps = steps;

  Vector x = Vector::Zero(n), eta = Vector::Zero(q), e(n + p), xu(n + m);
  for (long long t = 0; t < steps; ++t) {
    for (int i = 0; i < n + p; ++i) e(i) = normal(rng);
    const Vector noise = noise_chol * e;
    const Vector u = r.H * eta;
    const Vector y = sys.C * x + noise.tail(p);
    xu << x, u;
    acc.cost += xu.dot(Mc * xu);
    acc.sum_x += x;
    acc.sum_u += u;
    acc.sum_xx.noalias() += x * x.transpose();
    acc.sum_uu.noalias() += u * u.transpose();
    x = sys.A * x + sys.B * u + noise.head(n);
    eta = r.F * eta + r.G * y;
  }
  return acc;
}

}  // namespace detail

/// Monte-Carlo time average of the stage cost from zero initial conditions.
///
/// Noise is drawn i.i.d. per step with std::mt19937_64 and std::normal_distribution.
/// With shards > 1 the run is split into independent streams seeded by
/// std::seed_seq{seed, shard}; the result is a deterministic function of
/// (seed, steps, shards).
inline SimulationResult simulate(const ProblemInstance& inst, const ControllerRealization& r, long long steps,
                                 std::uint64_t seed, int shards = 1) {
  if (steps < 1) throw Error("simulate: steps must be >= 1");
  if (shards < 1) throw Error("simulate: shards must be >= 1");
  if (r.D.size() != 0 && max_abs(r.D) != 0.0) throw Error("simulate: controller must be strictly proper");
  const ClosedLoopModel cl = closed_loop(inst, r);  // shape checks
  (void)cl;
  const Matrix chol = noise_factor(inst.noise.joint());

  std::vector<detail::ShardAccumulator> parts(static_cast<std::size_t>(shards));
  auto shard_rng = [&](int s) {
    if (shards == 1) return std::mt19937_64(seed);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    return std::mt19937_64(seq);
  };
  auto shard_steps = [&](int s) { return steps / shards + (s < steps % shards ? 1 : 0); };
  if (shards == 1) {
    parts[0] = detail::simulate_shard(inst, r, chol, steps, shard_rng(0));
  } else {
    std::vector<std::thread> workers;
    for (int s = 0; s < shards; ++s)
      workers.emplace_back([&, s] { parts[s] = detail::simulate_shard(inst, r, chol, shard_steps(s), shard_rng(s)); });
    for (auto& w : workers) w.join();
  }

  // Reduction in shard order.
  detail::ShardAccumulator total = parts[0];
  for (std::size_t s = 1; s < parts.size(); ++s) {
    total.cost += parts[s].cost;
    total.sum_x += parts[s].sum_x;
    total.sum_u += parts[s].sum_u;
    total.sum_xx += parts[s].sum_xx;
    total.sum_uu += parts[s].sum_uu;
  }
  const double N = static_cast<double>(steps);
  SimulationResult res;
  res.empirical_cost = total.cost / N;
  res.summary.mean_x = total.sum_x / N;
  res.summary.mean_u = total.sum_u / N;
  res.summary.cov_x = total.sum_xx / N - res.summary.mean_x * res.summary.mean_x.transpose();
  res.summary.cov_u = total.sum_uu / N - res.summary.mean_u * res.summary.mean_u.transpose();
  res.seed = seed;
  res.steps = steps;
  res.shards = shards;
  return res;
}

}  // namespace dlqg
