#pragma once

// Reference controllers and a finite-horizon convex oracle for the two-subsystem problem.

#include <string>
#include <vector>

#include "dlqg/core.hpp"
#include "dlqg/coupled.hpp"
#include "dlqg/evaluation.hpp"
#include "dlqg/riccati.hpp"
#include "dlqg/synthesis.hpp"

namespace dlqg {

struct BaselineResult {
  ControllerRealization realization;
  double J = 0.0;
};

/// Kalman predictor plus LQ state feedback with access to all outputs:
/// x̂(t+1) = (A − KC − BL)x̂ + K y,  u = −L x̂.
inline BaselineResult centralized_lqg(const ProblemInstance& inst, const SynthesisOptions& opts = {},
                                      const LyapunovOptions& lyap = {}) {
  detail::require_valid(inst, opts.validation);
  const auto& sys = inst.system;
  const BlockDims& d = inst.dims();
  const int n = d.n(), m = d.m(), p = d.p();
  auto [est, ctl] = centralized_gains(inst, opts.dare);

  BaselineResult out;
  auto& r = out.realization;
  r.F = sys.A - est.K * sys.C - sys.B * ctl.L;
  r.G = est.K;
  r.H = -ctl.L;
  r.structure = {{0, 0}, {0, n}, {0, d.p1}, {d.p1, p}, {0, d.m1}, {d.m1, m}};
  out.J = detail::run_stage("centralized", [&] { return analytic_cost(closed_loop(inst, r), lyap); });
  return out;
}

struct CommonInfoResult : BaselineResult {
  GainSet gains;  // L2 = 0, K1 from the y1-only estimation DARE
};

/// Both inputs driven by the estimate ẑ built from y1 alone: u = −L ẑ. Equivalent to the
/// synthesized controller with the correction gain L2 forced to zero.
inline CommonInfoResult common_info_controller(const ProblemInstance& inst, const SynthesisOptions& opts = {},
                                               const LyapunovOptions& lyap = {}) {
  detail::require_valid(inst, opts.validation);
  const auto& sys = inst.system;
  const BlockDims& d = inst.dims();
  auto [est, ctl] = centralized_gains(inst, opts.dare);
  const ScriptNoise script = build_script_noise(est.P, est.K, sys, inst.noise);
  const EstimationDareSolution first = detail::run_stage("common_info", [&] {
    return solve_estimation_dare(sys.A, sys.C1(), script.Wc, script.Uc, script.Vc, opts.dare);
  });

  CommonInfoResult out;
  out.gains = {est.P, ctl.Pi, first.P, Matrix::Zero(d.n(), d.n()), est.K, ctl.L, first.K,
               Matrix::Zero(d.m2, d.n())};
  out.realization = assemble_realization(out.gains, sys);
  out.J = detail::run_stage("common_info", [&] { return analytic_cost(closed_loop(inst, out.realization), lyap); });
  return out;
}

/// Finite-horizon optimum over causal linear policies that respect the information pattern.
///
/// With x(0) = 0 and the stage cost averaged over t = 0..M−1, write the purified outputs
/// ỹ(s) (outputs of the noise-only plant, s = 0..M−2) and the policy
///   u(t) = Σ_{s<t} Θ(t,s) ỹ(s),   Θ(t,s)[u1 rows, ỹ2 columns] = 0.
/// State and input are linear in the whitened noise with coefficients affine in Θ, so
///   M·J(Θ) = c0 + 2⟨Θ, Cc⟩ + ⟨Θ, H Θ Z⟩
/// with H = Dᵀ blkdiag(Q,S;Sᵀ,R) D over the input-to-(x,u) map D and Z = E[ỹỹᵀ]. The
/// optimum solves mask∘(H Θ Z + Cc) = 0, computed by conjugate gradients preconditioned
/// with mask∘(H⁻¹ · Z⁻¹). H and Z are applied and inverted through state-space recursions
/// (LQ Riccati sweep, Kalman innovations) when R + BᵀPB and CΣCᵀ + V stay definite, and as
/// dense matrices otherwise.
class FiniteHorizonOracle {
 public:
  static constexpr int kMaxStateHorizon = 4000;

  FiniteHorizonOracle(const ProblemInstance& inst, int horizon) : inst_(inst), M_(horizon) {
    const BlockDims& d = inst.dims();
    n_ = d.n();
    m_ = d.m();
    p_ = d.p();
    if (M_ < 2) throw Error("finite_horizon_oracle: horizon must be >= 2");
    if (static_cast<long long>(n_) * M_ > kMaxStateHorizon)
      throw Error("finite_horizon_oracle: size guard n*M <= " + std::to_string(kMaxStateHorizon) + " exceeded");
    build();
  }

  int horizon() const { return M_; }
  const Matrix& mask() const { return mask_; }
  long long free_entries() const { return static_cast<long long>(mask_.sum()); }

  /// Average cost of the policy Θ over the horizon.
  double cost(const Eigen::Ref<const Matrix>& Theta) const {
    const Matrix HTZ = structured_ ? sandwich(Theta) : Matrix(H_ * Theta * Z_);
    return (c0_ + 2.0 * Theta.cwiseProduct(Cc_).sum() + Theta.cwiseProduct(HTZ).sum()) / M_;
  }

  const Matrix& H() const { return H_; }
  const Matrix& Z() const { return Z_; }
  /// True when H and Z are applied and inverted by O(M) recursions instead of dense algebra.
  bool structured() const { return structured_; }

  // The four operators act from the right on row vectors, so each time step is a contiguous
  // column block: X·H, X·Z, X·H⁻¹, X·Z⁻¹.

  // X·H: state recursion x(t+1) = A x + B u and its adjoint.
  Matrix right_H(const Eigen::Ref<const Matrix>& X) const {
    const Matrix At = inst_.system.A.transpose(), Bt = inst_.system.B.transpose();
    const auto& A = inst_.system.A;
    const auto& B = inst_.system.B;
    const auto& Q = inst_.cost.Q;
    const auto& S = inst_.cost.S;
    const auto& R = inst_.cost.R;
    const Eigen::Index c = X.rows();
    Matrix xs(c, n_ * M_);
    Matrix x = Matrix::Zero(c, n_), tmp(c, n_);
    for (int t = 0; t < M_; ++t) {
      xs.middleCols(n_ * t, n_) = x;
      tmp.noalias() = x * At;
      tmp.noalias() += X.middleCols(m_ * t, m_) * Bt;
      x.swap(tmp);
    }
    Matrix out(c, m_ * M_);
    Matrix mu = Matrix::Zero(c, n_);
    for (int t = M_ - 1; t >= 0; --t) {
      const auto xt = xs.middleCols(n_ * t, n_);
      const auto ut = X.middleCols(m_ * t, m_);
      auto ot = out.middleCols(m_ * t, m_);
      ot.noalias() = mu * B;
      ot.noalias() += xt * S;
      ot.noalias() += ut * R.transpose();
      tmp.noalias() = mu * A;
      tmp.noalias() += xt * Q.transpose();
      tmp.noalias() += ut * S.transpose();
      mu.swap(tmp);
    }
    return out;
  }

  // X·Z = (X·Y)·Yᵀ: adjoint of the noise-only plant, then the plant itself.
  Matrix right_Z(const Eigen::Ref<const Matrix>& X) const {
    const auto& A = inst_.system.A;
    const auto& C = inst_.system.C;
    const Matrix At = A.transpose(), Ct = C.transpose();
    const Matrix Fwt = Fw_.transpose(), Fvt = Fv_.transpose();
    const int T = M_ - 1, e = n_ + p_;
    const Eigen::Index c = X.rows();
    Matrix eps(c, e * T);
    Matrix nu = Matrix::Zero(c, n_), tmp(c, n_);
    for (int s = T - 1; s >= 0; --s) {
      const auto vs = X.middleCols(p_ * s, p_);
      auto es = eps.middleCols(e * s, e);
      es.noalias() = vs * Fv_;
      es.noalias() += nu * Fw_;
      tmp.noalias() = vs * C;
      tmp.noalias() += nu * A;
      nu.swap(tmp);
    }
    Matrix out(c, p_ * T);
    Matrix x = Matrix::Zero(c, n_);
    for (int s = 0; s < T; ++s) {
      const auto es = eps.middleCols(e * s, e);
      auto os = out.middleCols(p_ * s, p_);
      os.noalias() = x * Ct;
      os.noalias() += es * Fvt;
      tmp.noalias() = x * At;
      tmp.noalias() += es * Fwt;
      x.swap(tmp);
    }
    return out;
  }

  // X·H⁻¹: zero-start LQ problem with linear input terms, backward Riccati sweep then forward pass.
  Matrix right_solve_H(const Eigen::Ref<const Matrix>& X) const {
    const Matrix At = inst_.system.A.transpose(), Bt = inst_.system.B.transpose();
    const auto& B = inst_.system.B;
    const Eigen::Index c = X.rows();
    Matrix k(c, m_ * M_);
    Matrix s = Matrix::Zero(c, n_), tmp(c, n_), rhs(c, m_);
    for (int t = M_ - 1; t >= 0; --t) {
      const auto gt = X.middleCols(m_ * t, m_);
      const auto& g = lq_[t];
      rhs = gt;
      rhs.noalias() -= s * B;
      k.middleCols(m_ * t, m_).noalias() = rhs * g.MuuInv;
      tmp.noalias() = s * g.Acl;
      tmp.noalias() += gt * g.K;
      s.swap(tmp);
    }
    Matrix u(c, m_ * M_);
    Matrix x = Matrix::Zero(c, n_);
    for (int t = 0; t < M_; ++t) {
      auto ut = u.middleCols(m_ * t, m_);
      ut = k.middleCols(m_ * t, m_);
      ut.noalias() -= x * lq_[t].Kt;
      tmp.noalias() = x * At;
      tmp.noalias() += ut * Bt;
      x.swap(tmp);
    }
    return u;
  }

  // X·Z⁻¹: innovations form Z = L D Lᵀ from the time-varying Kalman predictor.
  Matrix right_solve_Z(const Eigen::Ref<const Matrix>& X) const {
    const Matrix At = inst_.system.A.transpose(), Ct = inst_.system.C.transpose();
    const auto& C = inst_.system.C;
    const int T = M_ - 1;
    const Eigen::Index c = X.rows();
    Matrix w(c, p_ * T);
    Matrix xi = Matrix::Zero(c, n_), tmp(c, n_), es(c, p_);
    for (int s = 0; s < T; ++s) {
      const auto& f = kf_[s];
      es = X.middleCols(p_ * s, p_);
      es.noalias() -= xi * Ct;
      w.middleCols(p_ * s, p_).noalias() = es * f.DInv;
      tmp.noalias() = xi * At;
      tmp.noalias() += es * f.Kt;
      xi.swap(tmp);
    }
    Matrix out(c, p_ * T);
    Matrix lambda = Matrix::Zero(c, n_);
    for (int s = T - 1; s >= 0; --s) {
      const auto& f = kf_[s];
      const auto ws = w.middleCols(p_ * s, p_);
      auto os = out.middleCols(p_ * s, p_);
      os = ws;
      os.noalias() += lambda * f.K;
      tmp.noalias() = lambda * f.Acl;
      tmp.noalias() -= ws * C;
      lambda.swap(tmp);
    }
    return out;
  }

  // H·X·Z and H⁻¹·X·Z⁻¹.
  Matrix sandwich(const Eigen::Ref<const Matrix>& X) const {
    return right_H(right_Z(X).transpose()).transpose();
  }
  Matrix sandwich_inverse(const Eigen::Ref<const Matrix>& X) const {
    return right_solve_H(right_solve_Z(X).transpose()).transpose();
  }

  struct Solution {
    Matrix Theta;
    double J = 0.0;
    int iterations = 0;
    double relative_residual = 0.0;
    double ridge = 0.0;
  };

  Solution solve(double tol = 1e-12, int max_iter = 20000) const {
    Solution sol;
    double ridge = 0.0;
    Eigen::LLT<Matrix> H_llt, Z_llt;
    if (!structured_) {
      H_llt.compute(H_);
      Z_llt.compute(Z_);
    }
    if (!structured_ && (H_llt.info() != Eigen::Success || Z_llt.info() != Eigen::Success)) {
      ridge = 1e-10;
      H_llt.compute(H_ + ridge * Matrix::Identity(H_.rows(), H_.cols()));
      Z_llt.compute(Z_ + ridge * Matrix::Identity(Z_.rows(), Z_.cols()));
      if (H_llt.info() != Eigen::Success || Z_llt.info() != Eigen::Success)
        throw Error("finite_horizon_oracle: normal equations singular even after ridge");
    }
    sol.ridge = ridge;

    auto apply = [&](const Matrix& X) -> Matrix {
      if (structured_) return sandwich(X).cwiseProduct(mask_);
      Matrix Y = (H_ * X * Z_).cwiseProduct(mask_);
      if (ridge > 0.0) Y += ridge * X;
      return Y;
    };
    auto precondition = [&](const Matrix& X) -> Matrix {
      if (structured_) return sandwich_inverse(X).cwiseProduct(mask_);
      const Matrix HX = H_llt.solve(X);
      return Z_llt.solve(HX.transpose()).transpose().cwiseProduct(mask_);
    };

    Matrix X = Matrix::Zero(mask_.rows(), mask_.cols());
    Matrix r = -Cc_.cwiseProduct(mask_);
    const double r0 = r.norm();
    sol.Theta = X;
    if (r0 == 0.0) {
      sol.J = cost(X);
      return sol;
    }
    Matrix z = precondition(r);
    Matrix dir = z;
    double rz = r.cwiseProduct(z).sum();
    int k = 0;
    double rel = 1.0;
    for (; k < max_iter; ++k) {
      const Matrix Ad = apply(dir);
      const double alpha = rz / dir.cwiseProduct(Ad).sum();
      X += alpha * dir;
      r -= alpha * Ad;
      rel = r.norm() / r0;
      if (rel <= tol) break;
      z = precondition(r);
      const double rz_next = r.cwiseProduct(z).sum();
      dir = z + (rz_next / rz) * dir;
      rz = rz_next;
    }
    sol.Theta = X;
    sol.iterations = k + 1;
    sol.relative_residual = rel;
    sol.J = cost(X);
    return sol;
  }

 private:
  void build() {
    const BlockDims& d = inst_.dims();
    const auto& sys = inst_.system;
    const int T = M_ - 1;       // purified outputs ỹ(0..M−2)
    const int e = n_ + p_;      // whitened noise per step
    const Matrix Fn = noise_factor(inst_.noise.joint());
    Fw_ = Fn.topRows(n_);
    Fv_ = Fn.bottomRows(p_);
    const Matrix& Fw = Fw_;
    const Matrix& Fv = Fv_;

    // Powers A^k, k = 0..M−1.
    std::vector<Matrix> Apow(static_cast<std::size_t>(M_));
    Apow[0] = Matrix::Identity(n_, n_);
    for (int k = 1; k < M_; ++k) Apow[k] = sys.A * Apow[k - 1];

    // Noise-only state x_n(t) and purified outputs in whitened coordinates.
    Matrix Xn = Matrix::Zero(n_ * M_, e * T);
    for (int t = 1; t < M_; ++t)
      for (int r = 0; r < t; ++r) Xn.block(n_ * t, e * r, n_, e) = Apow[t - 1 - r] * Fw;
    Matrix Y = Matrix::Zero(p_ * T, e * T);
    for (int s = 0; s < T; ++s) {
      Y.block(p_ * s, 0, p_, e * T) = sys.C * Xn.block(n_ * s, 0, n_, e * T);
      Y.block(p_ * s, e * s, p_, e) += Fv;
    }

    // Input-to-state map: x(t) += Σ_{r<t} A^{t−1−r} B u(r).
    Matrix Bb = Matrix::Zero(n_ * M_, m_ * M_);
    for (int t = 1; t < M_; ++t)
      for (int r = 0; r < t; ++r) Bb.block(n_ * t, m_ * r, n_, m_) = Apow[t - 1 - r] * sys.B;

    const Matrix& Q = inst_.cost.Q;
    const Matrix& S = inst_.cost.S;
    const Matrix& R = inst_.cost.R;
    auto blockdiag_left = [&](const Matrix& W, const Matrix& X, int bsize_in, int bsize_out) {
      // (I_M ⊗ W)·X for X with M row blocks of size bsize_in.
      Matrix out(bsize_out * M_, X.cols());
      for (int t = 0; t < M_; ++t) out.middleRows(bsize_out * t, bsize_out) = W * X.middleRows(bsize_in * t, bsize_in);
      return out;
    };

    const Matrix QBb = blockdiag_left(Q, Bb, n_, n_);
    const Matrix StBb = blockdiag_left(S.transpose(), Bb, n_, m_);
    H_ = Bb.transpose() * QBb + StBb + StBb.transpose();
    for (int t = 0; t < M_; ++t) H_.block(m_ * t, m_ * t, m_, m_) += R;
    H_ = symmetrized(H_);

    Z_ = symmetrized(Y * Y.transpose());

    const Matrix XnYt = Xn * Y.transpose();
    Cc_ = Bb.transpose() * blockdiag_left(Q, XnYt, n_, n_) + blockdiag_left(S.transpose(), XnYt, n_, m_);

    c0_ = 0.0;
    for (int t = 0; t < M_; ++t) {
      const auto Xt = Xn.middleRows(n_ * t, n_);
      c0_ += (Xt.transpose() * Q * Xt).trace();
    }

    mask_ = Matrix::Zero(m_ * M_, p_ * T);
    for (int t = 1; t < M_; ++t)
      for (int s = 0; s < std::min(t, T); ++s) {
        mask_.block(m_ * t, p_ * s, m_, p_).setOnes();
        mask_.block(m_ * t, p_ * s + d.p1, d.m1, d.p2).setZero();
      }

    structured_ = build_recursions();
  }

  // Time-varying gains for right_solve_H and right_solve_Z. False if any pivot block is not positive definite.
  bool build_recursions() {
    const auto& A = inst_.system.A;
    const auto& B = inst_.system.B;
    const auto& C = inst_.system.C;
    const auto& Q = inst_.cost.Q;
    const auto& S = inst_.cost.S;
    const auto& R = inst_.cost.R;

    lq_.assign(static_cast<std::size_t>(M_), {});
    Matrix P = Matrix::Zero(n_, n_);
    for (int t = M_ - 1; t >= 0; --t) {
      auto& g = lq_[t];
      g.Muu.compute(symmetrized(R + B.transpose() * P * B));
      if (g.Muu.info() != Eigen::Success) return false;
      const Matrix Mux = S.transpose() + B.transpose() * P * A;
      g.K = g.Muu.solve(Mux);
      g.Kt = g.K.transpose();
      g.MuuInv = g.Muu.solve(Matrix::Identity(m_, m_));
      g.Acl = A - B * g.K;
      P = symmetrized(Q + A.transpose() * P * A - Mux.transpose() * g.K);
    }

    const Matrix W = Fw_ * Fw_.transpose();
    const Matrix U = Fw_ * Fv_.transpose();
    const Matrix V = Fv_ * Fv_.transpose();
    kf_.assign(static_cast<std::size_t>(M_ - 1), {});
    Matrix Sigma = Matrix::Zero(n_, n_);
    for (int s = 0; s < M_ - 1; ++s) {
      auto& f = kf_[s];
      const Matrix D = symmetrized(C * Sigma * C.transpose() + V);
      f.D.compute(D);
      if (f.D.info() != Eigen::Success) return false;
      f.K = f.D.solve((A * Sigma * C.transpose() + U).transpose()).transpose();
      f.Kt = f.K.transpose();
      f.DInv = f.D.solve(Matrix::Identity(p_, p_));
      f.Acl = A - f.K * C;
      Sigma = symmetrized(A * Sigma * A.transpose() + W - f.K * D * f.K.transpose());
    }
    return true;
  }

  struct LqStep {
    Eigen::LLT<Matrix> Muu;
    Matrix K, Kt, MuuInv, Acl;
  };
  struct KalmanStep {
    Eigen::LLT<Matrix> D;
    Matrix K, Kt, DInv, Acl;
  };

  ProblemInstance inst_;
  int M_;
  int n_ = 0, m_ = 0, p_ = 0;
  Matrix H_, Z_, Cc_, mask_, Fw_, Fv_;
  double c0_ = 0.0;
  bool structured_ = false;
  std::vector<LqStep> lq_;
  std::vector<KalmanStep> kf_;
};

struct OracleResult {
  double J = 0.0;
  int horizon = 0;
  long long free_entries = 0;
  long long masked_entries = 0;
  double max_masked_abs = 0.0;  // largest |Θ| on a forbidden entry; zero by construction
  int iterations = 0;
  double relative_residual = 0.0;
  double ridge = 0.0;
  Matrix Theta;
};

inline OracleResult finite_horizon_oracle(const ProblemInstance& inst, int horizon) {
  const FiniteHorizonOracle oracle(inst, horizon);
  const auto sol = oracle.solve();
  OracleResult out;
  out.J = sol.J;
  out.horizon = horizon;
  out.free_entries = oracle.free_entries();
  const auto& mask = oracle.mask();
  out.masked_entries = static_cast<long long>(mask.size()) - out.free_entries;
  out.max_masked_abs = max_abs(sol.Theta.cwiseProduct((1.0 - mask.array()).matrix()));
  out.iterations = sol.iterations;
  out.relative_residual = sol.relative_residual;
  out.ridge = sol.ridge;
  out.Theta = sol.Theta;
  return out;
}

struct ComparisonReport {
  double J_central = 0.0;
  double J_distributed = 0.0;
  double J_common_info = 0.0;
  double J_oracle = 0.0;
  int horizon = 0;
  bool sandwich_ok = false;
  double slack = 0.0;

  double gap_central = 0.0;      // (J_distributed − J_central) / J_distributed
  double gap_common_info = 0.0;  // (J_common_info − J_distributed) / J_distributed
  double gap_oracle = 0.0;       // (J_distributed − J_oracle) / J_distributed
};

/// J_central ≤ J_distributed ≤ J_common_info, each with 1e-9·max(1, J_distributed) slack.
inline bool cost_sandwich(double J_central, double J_distributed, double J_common_info) {
  const double eps = 1e-9 * std::max(1.0, J_distributed);
  return J_central <= J_distributed + eps && J_distributed <= J_common_info + eps;
}

/// Synthesized controller against both baselines and the finite-horizon oracle.
inline ComparisonReport compare(const ProblemInstance& inst, int horizon, const SynthesisOptions& opts = {},
                                const LyapunovOptions& lyap = {}) {
  detail::require_valid(inst, opts.validation);
  ComparisonReport rep;
  rep.horizon = horizon;
  const SynthesisResult syn = detail::run_stage("synthesize", [&] { return synthesize(inst, opts); });
  rep.J_distributed =
      detail::run_stage("synthesize", [&] { return analytic_cost(closed_loop(inst, syn.realization), lyap); });
  rep.J_central = centralized_lqg(inst, opts, lyap).J;
  rep.J_common_info = common_info_controller(inst, opts, lyap).J;
  rep.J_oracle = detail::run_stage("oracle", [&] { return finite_horizon_oracle(inst, horizon).J; });

  const double Jd = rep.J_distributed;
  const double scale = std::max(Jd, 1e-300);
  rep.slack = 1e-9 * std::max(1.0, Jd);
  rep.sandwich_ok = cost_sandwich(rep.J_central, Jd, rep.J_common_info);
  rep.gap_central = (Jd - rep.J_central) / scale;
  rep.gap_common_info = (rep.J_common_info - Jd) / scale;
  rep.gap_oracle = (Jd - rep.J_oracle) / scale;
  return rep;
}

}  // namespace dlqg
