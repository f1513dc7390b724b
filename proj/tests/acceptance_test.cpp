// Acceptance criteria 1–7. Prints one PASS/FAIL line per criterion and exits non-zero if
// any criterion fails. Indented lines give per-instance detail for anything that missed.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fixtures.hpp"

using namespace dlqg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> notes;

  template <class... Args>
  void fail(const char* fmt, Args... args) {
    pass = false;
    note(fmt, args...);
  }
  template <class... Args>
  void note(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    notes.emplace_back(buf);
  }
};

struct Synthesized {
  ProblemInstance inst;
  SynthesisResult syn;
  double J = 0.0;
};

constexpr int kSweep = 50;

// Criteria 1 and 2 share the 50 synthesized controllers.
std::vector<Synthesized> run_sweep(Criterion& c1, Criterion& c2) {
  std::vector<Synthesized> out;
  const auto t0 = Clock::now();
  for (int seed = 1; seed <= kSweep; ++seed) {
    Synthesized s{fixtures::sweep_instance(seed), {}, 0.0};
    try {
      s.syn = synthesize(s.inst);
    } catch (const std::exception& e) {
      c1.fail("seed %d: synthesis failed: %s", seed, e.what());
      c2.fail("seed %d: no controller", seed);
      continue;
    }
    const auto& sys = s.inst.system;
    const auto& w = s.inst.noise;
    const auto& q = s.inst.cost;
    const auto& g = s.syn.gains;
    const BlockDims& d = s.inst.dims();

    // Substitution residuals, recomputed here from the gain set.
    const ScriptNoise script = build_script_noise(g.P, g.K, sys, w);
    const double r7 = relative_difference(g.P, estimation_riccati_rhs(sys.A, sys.C, w.W, w.U, w.V, g.P, g.K));
    const double r8 = control_dare_residual(sys.A, sys.B, q.Q, q.S, q.R, g.Pi);
    const double r9 = coupled_residual_P1(sys, script, g.P1, g.K1, g.L2);
    const double r10 = coupled_residual_Pi2(sys, q, g.Pi2, g.K1, g.L2);
    const double rad_est = spectral_radius(sys.A - g.K * sys.C);
    const double rad_ctl = spectral_radius(sys.A - sys.B * g.L);
    const double rad_cpl = spectral_radius(sys.A - g.K1 * sys.C1() - sys.B2() * g.L2);
    const double rad_F = spectral_radius(s.syn.realization.F);
    if (!(std::max({r7, r8, r9, r10}) <= 1e-9))
      c1.fail("seed %d: residuals %.2e %.2e %.2e %.2e", seed, r7, r8, r9, r10);
    if (!(std::max({rad_est, rad_ctl, rad_cpl, rad_F}) < 1.0))
      c1.fail("seed %d: radii %.4f %.4f %.4f %.4f", seed, rad_est, rad_ctl, rad_cpl, rad_F);
    if (s.syn.diagnostics.coupled_fallback_start) c1.note("seed %d: coupled iteration used the fallback start", seed);

    // Markov parameters from y2 to u1.
    const auto& r = s.syn.realization;
    Matrix HFk = r.H.topRows(d.m1);
    const Matrix Gy2 = r.G.rightCols(d.p2);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      worst = std::max(worst, max_abs(HFk * Gy2));
      HFk = HFk * r.F;
    }
    if (!(worst <= 1e-12)) c2.fail("seed %d: max |Markov(y2 -> u1)| = %.3e", seed, worst);
    if (!(r.G.topRightCorner(d.n(), d.p2).array() == 0.0).all()) c2.fail("seed %d: G top-right block not zero", seed);
    out.push_back(std::move(s));
  }
  const double secs = seconds_since(t0);
  c1.note("%d instances synthesized in %.2f s", static_cast<int>(out.size()), secs);
  if (!(secs <= 60.0)) c1.fail("runtime %.1f s exceeds 60 s", secs);
  return out;
}

void decomposition(const std::vector<Synthesized>& all, Criterion& c) {
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& s = all[i];
    const auto dec = cost_decomposition(s.inst, s.syn.gains);
    const double J = dec.J_total;
    const double trQP = (s.inst.cost.Q * s.syn.gains.P).trace();
    const double sum_err = std::abs(J - dec.sum());
    const double qp_err = std::abs(dec.J_tilde_x - trQP) / trQP;
    if (!(sum_err <= 1e-8 * std::max(1.0, J)) || !(dec.max_cross() <= 1e-8) || !(qp_err <= 1e-8))
      c.fail("instance %zu: |J - sum| = %.2e, max cross = %.2e, J~x vs tr(QP) = %.2e", i + 1, sum_err,
             dec.max_cross(), qp_err);
  }
}

void sandwich(std::vector<Synthesized>& all, Criterion& c) {
  int violations = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& s = all[i];
    s.J = analytic_cost(closed_loop(s.inst, s.syn.realization));
    const double Jc = centralized_lqg(s.inst).J;
    const double Ji = common_info_controller(s.inst).J;
    if (!cost_sandwich(Jc, s.J, Ji)) {
      ++violations;
      c.fail("instance %zu: J_central %.6f, J_distributed %.6f, J_common_info %.6f (excess %.3e relative)", i + 1,
             Jc, s.J, Ji, std::max(Jc - s.J, s.J - Ji) / s.J);
    }
  }
  c.note("%d of %d coupled instances violate the sandwich", violations, static_cast<int>(all.size()));

  for (int seed = 1; seed <= kSweep; ++seed) {
    const auto inst = decoupled(fixtures::sweep_instance(seed));
    const double J = analytic_cost(closed_loop(inst, synthesize(inst).realization));
    const double oracle = fixtures::decoupled_cost_oracle(inst);
    if (!(std::abs(J - oracle) / oracle <= 1e-8))
      c.fail("decoupled seed %d: J_distributed %.10f vs subsystem sum %.10f", seed, J, oracle);
  }
}

void oracle_agreement(Criterion& c) {
  const auto t0 = Clock::now();
  const int horizons[] = {25, 50, 100, 200};
  for (int seed = 1; seed <= 10; ++seed) {
    const auto inst = fixtures::oracle_instance(seed);
    const auto cl = closed_loop(inst, synthesize(inst).realization);
    const double Jd = analytic_cost(cl);
    double J[4];
    for (int k = 0; k < 4; ++k) J[k] = finite_horizon_oracle(inst, horizons[k]).J;
    const double gap = (Jd - J[3]) / Jd;
    const double Jfin = finite_horizon_cost(cl, 200);
    // Richardson extrapolation of the O(1/M) transient from M = 100, 200.
    const double extrapolated = 2.0 * J[3] - J[2];
    bool ok = J[3] <= Jd && gap <= 0.01;
    for (int k = 1; k < 4; ++k) ok = ok && J[k] >= J[k - 1] - 1e-10;
    if (!ok)
      c.fail("reference %d (n = %d): J_distributed %.6f, J_oracle(25..200) %.6f %.6f %.6f %.6f, gap %.3f%%", seed,
             inst.dims().n(), Jd, J[0], J[1], J[2], J[3], 100.0 * gap);
    c.note("reference %d: gap %.3f%% at M = 200, controller's own 200-step cost %.6f, extrapolated gap %.3f%%", seed,
           100.0 * gap, Jfin, 100.0 * (Jd - extrapolated) / Jd);
  }
  const double secs = seconds_since(t0);
  c.note("oracle runs took %.1f s", secs);
  if (!(secs <= 300.0)) c.fail("runtime %.1f s exceeds 5 min", secs);
}

void monte_carlo(const std::vector<Synthesized>& all, Criterion& c) {
  for (int i = 0; i < 5 && i < static_cast<int>(all.size()); ++i) {
    const auto& s = all[i];
    const std::uint64_t seed = 1000 + i;
    const double J = analytic_cost(closed_loop(s.inst, s.syn.realization));
    const auto a = simulate(s.inst, s.syn.realization, 1000000, seed);
    const auto b = simulate(s.inst, s.syn.realization, 1000000, seed);
    const double err = std::abs(a.empirical_cost - J) / J;
    if (!(err <= 0.02)) c.fail("reference %d: empirical %.6f vs analytic %.6f (%.2f%%)", i + 1, a.empirical_cost, J, 100 * err);
    if (a.empirical_cost != b.empirical_cost) c.fail("reference %d: repeated run differs", i + 1);
    c.note("reference %d: relative error %.3f%%", i + 1, 100 * err);
  }
}

void spot_checks(Criterion& c) {
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const Matrix half = Matrix::Constant(1, 1, 0.5);
  const Matrix zero = Matrix::Zero(1, 1);
  const double root = fixtures::scalar_riccati_root();
  const auto ctl = solve_control_dare(half, one, one, zero, one);
  const auto est = solve_estimation_dare(half, one, one, zero, one);
  if (!(std::abs(ctl.Pi(0, 0) - root) <= 1e-9)) c.fail("control DARE %.12f vs %.12f", ctl.Pi(0, 0), root);
  if (!(std::abs(est.P(0, 0) - root) <= 1e-9)) c.fail("estimation DARE %.12f vs %.12f", est.P(0, 0), root);

  const Matrix A = 0.9 * fixtures::rotation(std::numbers::pi / 6);
  const Matrix I = Matrix::Identity(2, 2);
  const double err = max_abs(solve_dlyap(A, I) - fixtures::lyapunov_series(A, I));
  if (!(err <= 1e-11)) c.fail("dlyap vs series %.3e", err);
  c.note("Pi = %.12f (root %.12f), dlyap error %.2e", ctl.Pi(0, 0), root, err);
}

void report(const Criterion& c) {
  std::printf("[%s] criterion %d: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
  for (const auto& n : c.notes) std::printf("       %s\n", n.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  Criterion c1{1, "Riccati certification on 50 random instances"};
  Criterion c2{2, "information pattern of every synthesized controller"};
  Criterion c3{3, "cost decomposition and orthogonality"};
  Criterion c4{4, "cost sandwich and decoupled subsystem sum"};
  Criterion c5{5, "finite-horizon oracle agreement on 10 reference instances"};
  Criterion c6{6, "Monte-Carlo consistency and reproducibility"};
  Criterion c7{7, "solver spot checks"};

  auto guarded = [](Criterion& c, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      c.fail("unexpected error: %s", e.what());
    }
  };

  std::vector<Synthesized> sweep;
  guarded(c1, [&] { sweep = run_sweep(c1, c2); });
  report(c1);
  report(c2);
  guarded(c3, [&] { decomposition(sweep, c3); });
  report(c3);
  guarded(c4, [&] { sandwich(sweep, c4); });
  report(c4);
  guarded(c5, [&] { oracle_agreement(c5); });
  report(c5);
  guarded(c6, [&] { monte_carlo(sweep, c6); });
  report(c6);
  guarded(c7, [&] { spot_checks(c7); });
  report(c7);

  int failed = 0;
  for (const auto* c : {&c1, &c2, &c3, &c4, &c5, &c6, &c7}) failed += c->pass ? 0 : 1;
  std::printf("%d of 7 criteria passed\n", 7 - failed);
  return failed == 0 ? 0 : 1;
}
