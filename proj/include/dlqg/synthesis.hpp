#pragma once

#include <string>

#include "dlqg/core.hpp"
#include "dlqg/coupled.hpp"
#include "dlqg/riccati.hpp"

namespace dlqg {

/// Half-open index range [begin, end).
struct IndexRange {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Which controller states, measurements and inputs belong to which block.
struct RealizationStructure {
  IndexRange zhat;  // estimate of z from y1 only
  IndexRange z;     // centralized one-step predictor
  IndexRange y1, y2;
  IndexRange u1, u2;

  friend bool operator==(const RealizationStructure&, const RealizationStructure&) = default;
};

/// η(t+1) = F·η(t) + G·y(t),  u(t) = H·η(t) + D·y(t).
///
/// D is empty for every controller built here: inputs at time t depend on outputs up to
/// t − 1 only. It exists so that imported realizations can be audited.
struct ControllerRealization {
  Matrix F;  // q×q
  Matrix G;  // q×p
  Matrix H;  // m×q
  Matrix D;  // m×p or empty
  RealizationStructure structure;

  int q() const { return static_cast<int>(F.rows()); }
};

struct GainSet {
  Matrix P, Pi, P1, Pi2;
  Matrix K;   // n×p
  Matrix L;   // m×n
  Matrix K1;  // n×p1
  Matrix L2;  // m2×n
};

struct GainDiagnostics {
  double radius_estimation = 0.0;  // ρ(A − KC)
  double radius_control = 0.0;     // ρ(A − BL)
  double radius_coupled = 0.0;     // ρ(A − K1C1 − B2L2)
  double radius_controller = 0.0;  // ρ(F)
  double residual_P = 0.0, residual_Pi = 0.0, residual_P1 = 0.0, residual_Pi2 = 0.0;
  int coupled_iterations = 0;
  double coupled_final_step = 0.0;
  bool coupled_fallback_start = false;
};

struct SynthesisOptions {
  Tolerances validation{};
  DareOptions dare{};
  CoupledOptions coupled{};
};

struct SynthesisResult {
  GainSet gains;
  ControllerRealization realization;
  GainDiagnostics diagnostics;
};

/// Controller with state η = [ẑ; z]:
///   ẑ(t+1) = (A − K1C1 − BL)ẑ + K1 y1
///   z(t+1) = (−BL + B2L2)ẑ + (A − KC − B2L2)z + K y
///   u      = (−L + E2L2)ẑ − E2L2 z,   E2 = [0; I_m2]
inline ControllerRealization assemble_realization(const GainSet& g, const PartitionedSystem& sys) {
  const BlockDims& d = sys.dims;
  const int n = d.n(), m = d.m(), p = d.p();
  if (g.K.rows() != n || g.K.cols() != p) throw DimensionError("K", "must be n×p");
  if (g.L.rows() != m || g.L.cols() != n) throw DimensionError("L", "must be m×n");
  if (g.K1.rows() != n || g.K1.cols() != d.p1) throw DimensionError("K1", "must be n×p1");
  if (g.L2.rows() != d.m2 || g.L2.cols() != n) throw DimensionError("L2", "must be m2×n");

  const Matrix& A = sys.A;
  const Matrix& B = sys.B;
  const Matrix B2L2 = sys.B2() * g.L2;
  Matrix E2L2 = Matrix::Zero(m, n);
  E2L2.bottomRows(d.m2) = g.L2;

  ControllerRealization r;
  r.F = Matrix::Zero(2 * n, 2 * n);
  r.F.topLeftCorner(n, n) = A - g.K1 * sys.C1() - B * g.L;
  r.F.bottomLeftCorner(n, n) = -B * g.L + B2L2;
  r.F.bottomRightCorner(n, n) = A - g.K * sys.C - B2L2;

  r.G = Matrix::Zero(2 * n, p);
  r.G.topLeftCorner(n, d.p1) = g.K1;
  r.G.bottomRows(n) = g.K;

  r.H = Matrix::Zero(m, 2 * n);
  r.H.leftCols(n) = -g.L + E2L2;
  r.H.rightCols(n) = -E2L2;

  r.structure = {{0, n}, {n, 2 * n}, {0, d.p1}, {d.p1, p}, {0, d.m1}, {d.m1, m}};
  return r;
}

/// True iff no output y2 reaches input u1 within `horizon` steps and there is no direct
/// feedthrough. Markov parameters H·Fᵏ·G are checked against an absolute 1e-12 bound.
inline bool check_information_pattern(const ControllerRealization& r, int horizon, double bound = 1e-12) {
  if (horizon < 1) throw Error("check_information_pattern: horizon must be >= 1");
  const auto& s = r.structure;
  if (r.D.size() != 0 && max_abs(r.D) != 0.0) return false;
  if (s.u1.size() == 0 || s.y2.size() == 0) return true;

  // Rows of H·Fᵏ for the u1 channels only.
  Matrix HFk = r.H.middleRows(s.u1.begin, s.u1.size());
  const Matrix G_y2 = r.G.middleCols(s.y2.begin, s.y2.size());
  for (int k = 0; k < horizon; ++k) {
    if (max_abs(HFk * G_y2) > bound) return false;
    HFk = HFk * r.F;
  }
  return true;
}

namespace detail {

template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(stage, StageError::Kind::validation, e.what());
  } catch (const DimensionError& e) {
    throw StageError(stage, StageError::Kind::validation, e.what());
  } catch (const Error& e) {
    throw StageError(stage, StageError::Kind::solver, e.what());
  }
}

inline void require_valid(const ProblemInstance& inst, const Tolerances& tol) {
  run_stage("validate", [&] {
    const ValidationReport report = validate(inst, tol);
    if (!report.ok()) {
      std::string msg = "instance is not admissible:";
      for (const auto& v : report.violations) msg += " [" + v.code + "] " + v.message + ";";
      throw ValidationError(msg);
    }
    return 0;
  });
}

}  // namespace detail

/// Centralized predictor (P, K) and state-feedback (Π, L) for the instance.
inline std::pair<EstimationDareSolution, ControlDareSolution> centralized_gains(const ProblemInstance& inst,
                                                                               const DareOptions& dare) {
  const auto& sys = inst.system;
  auto est = detail::run_stage("estimation_dare", [&] {
    return solve_estimation_dare(sys.A, sys.C, inst.noise.W, inst.noise.U, inst.noise.V, dare);
  });
  auto ctl = detail::run_stage("control_dare", [&] {
    return solve_control_dare(sys.A, sys.B, inst.cost.Q, inst.cost.S, inst.cost.R, dare);
  });
  return {std::move(est), std::move(ctl)};
}

/// Full pipeline: validate, the two centralized DAREs, the script noise, the coupled pair,
/// and the controller realization. Every failure is reported as a StageError.
inline SynthesisResult synthesize(const ProblemInstance& inst, const SynthesisOptions& opts = {}) {
  detail::require_valid(inst, opts.validation);
  const auto& sys = inst.system;

  auto [est, ctl] = centralized_gains(inst, opts.dare);
  const ScriptNoise script =
      detail::run_stage("script_noise", [&] { return build_script_noise(est.P, est.K, sys, inst.noise); });

  CoupledOptions copts = opts.coupled;
  copts.dare = opts.dare;
  const CoupledStart start =
      detail::run_stage("coupled", [&] { return coupled_start(sys, inst.cost, ctl.L, opts.dare); });
  const CoupledSolution cs =
      detail::run_stage("coupled", [&] { return solve_coupled(sys, inst.cost, script, start.L2, copts); });

  SynthesisResult out;
  out.gains = {est.P, ctl.Pi, cs.P1, cs.Pi2, est.K, ctl.L, cs.K1, cs.L2};
  out.realization = detail::run_stage("assemble", [&] { return assemble_realization(out.gains, sys); });

  auto& diag = out.diagnostics;
  diag.radius_estimation = est.closed_loop_radius;
  diag.radius_control = ctl.closed_loop_radius;
  diag.radius_coupled = cs.radius_est;
  diag.radius_controller = spectral_radius(out.realization.F);
  diag.residual_P = est.residual;
  diag.residual_Pi = ctl.residual;
  diag.residual_P1 = cs.residual_P1;
  diag.residual_Pi2 = cs.residual_Pi2;
  diag.coupled_iterations = cs.iterations;
  diag.coupled_final_step = cs.final_step_size;
  diag.coupled_fallback_start = start.fallback;

  detail::run_stage("assemble", [&] {
    if (!(diag.radius_controller < 1.0))
      throw InstabilityError("controller realization F is not stable", diag.radius_controller);
    return 0;
  });
  return out;
}

}  // namespace dlqg
