#pragma once

// Command-line front end. `run` is the whole program minus process plumbing so that tests
// can drive it with in-memory streams.
//
// Exit codes: 0 success, 1 validation failure, 2 solver failure, 3 I/O or parse error.

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dlqg/baselines.hpp"
#include "dlqg/core.hpp"
#include "dlqg/evaluation.hpp"
#include "dlqg/io.hpp"
#include "dlqg/synthesis.hpp"

namespace dlqg::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

struct CliConfig {
  std::string subcommand;
  std::string input;
  std::string controller;
  std::string output;
  double dare_tol = DareOptions{}.tol;
  double lyap_tol = LyapunovOptions{}.tol;
  double coupled_tol = CoupledOptions{}.tol;
  int max_iter = CoupledOptions{}.max_iter;
  int dare_max_iter = DareOptions{}.max_iter;
  double damping = CoupledOptions{}.damping;
  std::uint64_t seed = 0;
  long long steps = 1000000;
  int shards = 1;
  int horizon = 200;
  std::vector<int> dims{1, 1, 1, 1, 1, 1};
  double spectral_target = 0.9;
  bool decoupled = false;
  bool json = false;

  SynthesisOptions synthesis() const {
    SynthesisOptions o;
    o.dare.tol = dare_tol;
    o.dare.max_iter = dare_max_iter;
    o.coupled.tol = coupled_tol;
    o.coupled.max_iter = max_iter;
    o.coupled.damping = damping;
    return o;
  }
  LyapunovOptions lyapunov() const { return {lyap_tol}; }

  Json provenance() const {
    Json j = {{"subcommand", subcommand},
              {"tolerances",
               {{"dare_tol", dare_tol},
                {"lyap_tol", lyap_tol},
                {"coupled_tol", coupled_tol},
                {"max_iter", max_iter},
                {"dare_max_iter", dare_max_iter},
                {"damping", damping}}}};
    if (!input.empty()) j["problem"] = input;
    if (!controller.empty()) j["controller"] = controller;
    if (subcommand == "simulate" || subcommand == "rand") j["seed"] = seed;
    if (subcommand == "simulate") {
      j["steps"] = steps;
      j["shards"] = shards;
    }
    if (subcommand == "compare") j["horizon"] = horizon;
    if (subcommand == "rand") {
      j["dims"] = dims;
      j["spectral_target"] = spectral_target;
      j["decoupled"] = decoupled;
    }
    return j;
  }
};

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream ss;
  ss << std::setprecision(12) << x;
  return ss.str();
}

inline void add_solver_flags(CLI::App* app, CliConfig& cfg) {
  auto positive = CLI::PositiveNumber;
  app->add_option("--dare-tol", cfg.dare_tol, "DARE relative residual tolerance")->check(positive);
  app->add_option("--lyap-tol", cfg.lyap_tol, "Lyapunov relative residual tolerance")->check(positive);
  app->add_option("--coupled-tol", cfg.coupled_tol, "coupled iteration step tolerance")->check(positive);
  app->add_option("--max-iter", cfg.max_iter, "coupled iteration limit")->check(CLI::PositiveNumber);
  app->add_option("--dare-max-iter", cfg.dare_max_iter, "DARE fallback iteration limit")->check(CLI::PositiveNumber);
  app->add_option("--damping", cfg.damping, "coupled iteration damping in (0, 1]")->check(CLI::Range(1e-12, 1.0));
  app->add_flag("--json", cfg.json, "machine-readable output on standard output");
}

struct Radii {
  double estimation, control, coupled, controller, closed_loop;
};

inline Radii radii_of(const ProblemInstance& inst, const ControllerFile& c) {
  const auto& sys = inst.system;
  const auto& g = c.gains;
  return {spectral_radius(sys.A - g.K * sys.C), spectral_radius(sys.A - sys.B * g.L),
          spectral_radius(sys.A - g.K1 * sys.C1() - sys.B2() * g.L2), spectral_radius(c.realization.F),
          spectral_radius(closed_loop(inst, c.realization).Acl)};
}

inline Json to_json(const Radii& r) {
  return {{"estimation", r.estimation},
          {"control", r.control},
          {"coupled", r.coupled},
          {"controller", r.controller},
          {"closed_loop", r.closed_loop}};
}

inline int cmd_validate(const CliConfig& cfg, std::ostream& out) {
  const ProblemInstance inst = load_problem(cfg.input, /*check=*/false);
  const ValidationReport rep = validate(inst);
  if (cfg.json) {
    Json j = dlqg::to_json(rep);
    j["provenance"] = cfg.provenance();
    out << j.dump(2) << "\n";
  } else if (rep.ok()) {
    out << "valid: no violations\n";
  } else {
    out << "invalid: " << rep.violations.size() << " violation(s)\n";
    for (const auto& v : rep.violations) out << "  [" << v.code << "] " << v.message << "\n";
  }
  return rep.ok() ? kOk : kValidation;
}

inline int cmd_synth(const CliConfig& cfg, std::ostream& out) {
  const ProblemInstance inst = load_problem(cfg.input, /*check=*/false);
  const SynthesisResult syn = synthesize(inst, cfg.synthesis());
  Json prov = cfg.provenance();
  prov["diagnostics"] = dlqg::to_json(syn.diagnostics);
  save_controller(cfg.output, syn.realization, syn.gains, prov);
  if (cfg.json) {
    out << Json{{"controller", cfg.output}, {"q", syn.realization.q()}, {"diagnostics", dlqg::to_json(syn.diagnostics)}}
               .dump(2)
        << "\n";
  } else {
    const auto& d = syn.diagnostics;
    out << "wrote " << cfg.output << " (q = " << syn.realization.q() << ")\n"
        << "coupled iterations: " << d.coupled_iterations << "\n"
        << "radii: A-KC " << fmt(d.radius_estimation) << ", A-BL " << fmt(d.radius_control) << ", A-K1C1-B2L2 "
        << fmt(d.radius_coupled) << ", F " << fmt(d.radius_controller) << "\n";
  }
  return kOk;
}

inline int cmd_analyze(const CliConfig& cfg, std::ostream& out) {
  const ProblemInstance inst = load_problem(cfg.input);
  const ControllerFile c = load_controller(cfg.controller);
  const double J = analytic_cost(closed_loop(inst, c.realization), cfg.lyapunov());
  const DecompositionReport dec = cost_decomposition(inst, c.gains, cfg.lyapunov());
  const Radii radii = radii_of(inst, c);
  const bool pattern = check_information_pattern(c.realization, 50);
  if (cfg.json) {
    Json j = {{"J", J},
              {"decomposition", dlqg::to_json(dec)},
              {"radii", to_json(radii)},
              {"information_pattern_ok", pattern},
              {"provenance", cfg.provenance()}};
    out << j.dump(2) << "\n";
  } else {
    out << "J = " << fmt(J) << "\n"
        << "  J_hat_z   = " << fmt(dec.J_hat_z) << "\n"
        << "  J_tilde_z = " << fmt(dec.J_tilde_z) << "\n"
        << "  J_tilde_x = " << fmt(dec.J_tilde_x) << "\n"
        << "  max cross-covariance = " << fmt(dec.max_cross()) << "\n"
        << "radii: A-KC " << fmt(radii.estimation) << ", A-BL " << fmt(radii.control) << ", A-K1C1-B2L2 "
        << fmt(radii.coupled) << ", F " << fmt(radii.controller) << ", closed loop " << fmt(radii.closed_loop) << "\n"
        << "information pattern: " << (pattern ? "ok" : "VIOLATED") << "\n";
  }
  return kOk;
}

inline int cmd_simulate(const CliConfig& cfg, std::ostream& out) {
  const ProblemInstance inst = load_problem(cfg.input);
  const ControllerFile c = load_controller(cfg.controller);
  const SimulationResult res = simulate(inst, c.realization, cfg.steps, cfg.seed, cfg.shards);
  if (cfg.json) {
    Json j = dlqg::to_json(res);
    j["provenance"] = cfg.provenance();
    out << j.dump(2) << "\n";
  } else {
    out << "empirical cost = " << fmt(res.empirical_cost) << " (" << res.steps << " steps, seed " << res.seed << ")\n";
  }
  return kOk;
}

inline int cmd_compare(const CliConfig& cfg, std::ostream& out) {
  const ProblemInstance inst = load_problem(cfg.input, /*check=*/false);
  const ComparisonReport rep = compare(inst, cfg.horizon, cfg.synthesis(), cfg.lyapunov());
  if (cfg.json) {
    Json j = dlqg::to_json(rep);
    j["provenance"] = cfg.provenance();
    out << j.dump(2) << "\n";
  } else {
    out << "J_central     = " << fmt(rep.J_central) << "\n"
        << "J_distributed = " << fmt(rep.J_distributed) << "\n"
        << "J_common_info = " << fmt(rep.J_common_info) << "\n"
        << "J_oracle(" << rep.horizon << ") = " << fmt(rep.J_oracle) << "\n"
        << "sandwich_ok   = " << (rep.sandwich_ok ? "true" : "false") << "\n"
        << "oracle gap    = " << fmt(rep.gap_oracle) << "\n";
  }
  return kOk;
}

inline int cmd_rand(const CliConfig& cfg, std::ostream& out) {
  if (cfg.dims.size() != 6) throw ValidationError("--dims expects n1,n2,m1,m2,p1,p2");
  const BlockDims dims{cfg.dims[0], cfg.dims[1], cfg.dims[2], cfg.dims[3], cfg.dims[4], cfg.dims[5]};
  ProblemInstance inst = random_instance(cfg.seed, dims, cfg.spectral_target);
  if (cfg.decoupled) inst = decoupled(inst);
  save_problem(inst, cfg.output);
  if (cfg.json) {
    out << Json{{"problem", cfg.output}, {"provenance", cfg.provenance()}}.dump(2) << "\n";
  } else {
    out << "wrote " << cfg.output << "\n";
  }
  return kOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  CLI::App app{"Optimal output-feedback controllers for two lower-triangularly coupled linear systems", "dlqg"};
  app.require_subcommand(1);

  auto* validate_cmd = app.add_subcommand("validate", "check a problem file");
  validate_cmd->add_option("problem", cfg.input, "problem file")->required();

  auto* synth_cmd = app.add_subcommand("synth", "synthesize the distributed controller");
  synth_cmd->add_option("problem", cfg.input, "problem file")->required();
  synth_cmd->add_option("-o,--output", cfg.output, "controller file to write")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "analytic cost, decomposition and radii of a controller");
  analyze_cmd->add_option("problem", cfg.input, "problem file")->required();
  analyze_cmd->add_option("controller", cfg.controller, "controller file")->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte-Carlo cost of a controller");
  simulate_cmd->add_option("problem", cfg.input, "problem file")->required();
  simulate_cmd->add_option("controller", cfg.controller, "controller file")->required();
  simulate_cmd->add_option("--steps", cfg.steps, "number of steps")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", cfg.seed, "random seed");
  simulate_cmd->add_option("--shards", cfg.shards, "independent noise streams")->check(CLI::PositiveNumber);

  auto* compare_cmd = app.add_subcommand("compare", "compare against baselines and the finite-horizon oracle");
  compare_cmd->add_option("problem", cfg.input, "problem file")->required();
  compare_cmd->add_option("--horizon", cfg.horizon, "oracle horizon")->check(CLI::Range(2, 1 << 20));

  auto* rand_cmd = app.add_subcommand("rand", "write a random admissible problem");
  rand_cmd->add_option("--seed", cfg.seed, "random seed");
  rand_cmd->add_option("--dims", cfg.dims, "n1,n2,m1,m2,p1,p2")->delimiter(',')->expected(6);
  rand_cmd->add_option("--spectral-target", cfg.spectral_target, "spectral radius of A")->check(CLI::Range(1e-9, 2.0));
  rand_cmd->add_flag("--decoupled", cfg.decoupled, "remove all coupling between the subsystems");
  rand_cmd->add_option("-o,--output", cfg.output, "problem file to write")->required();

  for (auto* sub : {validate_cmd, synth_cmd, analyze_cmd, simulate_cmd, compare_cmd, rand_cmd})
    detail::add_solver_flags(sub, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "dlqg: " << e.what() << "\n";
    return kIo;
  }

  try {
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (*validate_cmd) return detail::cmd_validate(cfg, out);
    if (*synth_cmd) return detail::cmd_synth(cfg, out);
    if (*analyze_cmd) return detail::cmd_analyze(cfg, out);
    if (*simulate_cmd) return detail::cmd_simulate(cfg, out);
    if (*compare_cmd) return detail::cmd_compare(cfg, out);
    if (*rand_cmd) return detail::cmd_rand(cfg, out);
  } catch (const ParseError& e) {
    err << "dlqg: parse error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "dlqg: I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const ValidationError& e) {
    err << "dlqg: validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const DimensionError& e) {
    err << "dlqg: validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const StageError& e) {
    err << "dlqg: " << e.what() << "\n";
    switch (e.kind()) {
      case StageError::Kind::validation: return kValidation;
      case StageError::Kind::io: return kIo;
      case StageError::Kind::solver: return kSolver;
    }
  } catch (const Error& e) {
    err << "dlqg: solver failure: " << e.what() << "\n";
    return kSolver;
  }
  return kOk;
}

}  // namespace dlqg::cli
