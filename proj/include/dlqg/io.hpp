#pragma once

// JSON persistence for problems, controllers and reports.
//
// Problem file:
//   { "dims": {"n1":..,"n2":..,"m1":..,"m2":..,"p1":..,"p2":..},
//     "A": [[..],..], "B": .., "C": .., "W": .., "U": .., "V": .., "Q": .., "S": .., "R": .. }
// Matrices are row-major nested arrays of finite doubles. Every field is mandatory.
//
// Controller file:
//   { "format": "dlqg-controller", "version": 1, "q": 2n,
//     "F": .., "G": .., "H": ..,
//     "structure": {"zhat": [b,e], "z": [b,e], "y1": [b,e], "y2": [b,e], "u1": [b,e], "u2": [b,e]},
//     "gains": {"P","Pi","P1","Pi2","K","L","K1","L2"},
//     "provenance": {..} }
// Index ranges are half-open.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dlqg/baselines.hpp"
#include "dlqg/core.hpp"
#include "dlqg/evaluation.hpp"
#include "dlqg/synthesis.hpp"

namespace dlqg {

using Json = nlohmann::ordered_json;

inline Json matrix_to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field \"" + field + "\": expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array()) throw ParseError("field \"" + field + "\" row " + std::to_string(i) + ": expected an array");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols)
      throw ParseError("field \"" + field + "\" row " + std::to_string(i) + ": ragged row (expected " +
                       std::to_string(cols) + " entries, got " + std::to_string(j[i].size()) + ")");
  }
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) {
      const Json& v = j[i][k];
      if (!v.is_number())
        throw ParseError("field \"" + field + "\" entry (" + std::to_string(i) + "," + std::to_string(k) +
                         "): expected a number");
      const double x = v.get<double>();
      if (!std::isfinite(x))
        throw ParseError("field \"" + field + "\" entry (" + std::to_string(i) + "," + std::to_string(k) +
                         "): not finite");
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x;
    }
  return M;
}

namespace detail {

inline const Json& require_field(const Json& j, const std::string& field, const std::string& where = "") {
  if (!j.is_object() || !j.contains(field))
    throw ParseError("missing field \"" + (where.empty() ? field : where + "." + field) + "\"");
  return j.at(field);
}

inline int require_int(const Json& j, const std::string& field, const std::string& where) {
  const Json& v = require_field(j, field, where);
  if (!v.is_number_integer()) throw ParseError("field \"" + where + "." + field + "\": expected an integer");
  return v.get<int>();
}

inline Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

inline Json range_to_json(const IndexRange& r) { return Json::array({r.begin, r.end}); }

inline IndexRange range_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ParseError("field \"structure." + field + "\": expected [begin, end]");
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace detail

inline Json problem_to_json(const ProblemInstance& inst) {
  const BlockDims& d = inst.dims();
  Json j;
  j["dims"] = {{"n1", d.n1}, {"n2", d.n2}, {"m1", d.m1}, {"m2", d.m2}, {"p1", d.p1}, {"p2", d.p2}};
  j["A"] = matrix_to_json(inst.system.A);
  j["B"] = matrix_to_json(inst.system.B);
  j["C"] = matrix_to_json(inst.system.C);
  j["W"] = matrix_to_json(inst.noise.W);
  j["U"] = matrix_to_json(inst.noise.U);
  j["V"] = matrix_to_json(inst.noise.V);
  j["Q"] = matrix_to_json(inst.cost.Q);
  j["S"] = matrix_to_json(inst.cost.S);
  j["R"] = matrix_to_json(inst.cost.R);
  return j;
}

/// Schema-level parse only. Shapes and admissibility are checked by validate().
inline ProblemInstance problem_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("problem document must be a JSON object");
  const Json& dj = detail::require_field(j, "dims");
  ProblemInstance inst;
  BlockDims& d = inst.system.dims;
  d.n1 = detail::require_int(dj, "n1", "dims");
  d.n2 = detail::require_int(dj, "n2", "dims");
  d.m1 = detail::require_int(dj, "m1", "dims");
  d.m2 = detail::require_int(dj, "m2", "dims");
  d.p1 = detail::require_int(dj, "p1", "dims");
  d.p2 = detail::require_int(dj, "p2", "dims");
  auto mat = [&](const char* name) { return matrix_from_json(detail::require_field(j, name), name); };
  inst.system.A = mat("A");
  inst.system.B = mat("B");
  inst.system.C = mat("C");
  inst.noise.W = mat("W");
  inst.noise.U = mat("U");
  inst.noise.V = mat("V");
  inst.cost.Q = mat("Q");
  inst.cost.S = mat("S");
  inst.cost.R = mat("R");
  return inst;
}

/// Reads a problem file. With `check` set the instance must also pass validate(), otherwise
/// ValidationError lists the violations.
inline ProblemInstance load_problem(const std::string& path, bool check = true, const Tolerances& tol = {}) {
  ProblemInstance inst = problem_from_json(detail::parse_text(detail::read_file(path), path));
  if (check) {
    const ValidationReport report = validate(inst, tol);
    if (!report.ok()) {
      std::string msg = path + ":";
      for (const auto& v : report.violations) msg += " " + v.message + ";";
      throw ValidationError(msg);
    }
  }
  return inst;
}

inline void save_problem(const ProblemInstance& inst, const std::string& path) {
  detail::write_file(path, problem_to_json(inst).dump(2) + "\n");
}

inline Json gains_to_json(const GainSet& g) {
  return {{"P", matrix_to_json(g.P)},   {"Pi", matrix_to_json(g.Pi)}, {"P1", matrix_to_json(g.P1)},
          {"Pi2", matrix_to_json(g.Pi2)}, {"K", matrix_to_json(g.K)},  {"L", matrix_to_json(g.L)},
          {"K1", matrix_to_json(g.K1)}, {"L2", matrix_to_json(g.L2)}};
}

inline GainSet gains_from_json(const Json& j) {
  auto mat = [&](const char* name) {
    return matrix_from_json(detail::require_field(j, name, "gains"), std::string("gains.") + name);
  };
  return {mat("P"), mat("Pi"), mat("P1"), mat("Pi2"), mat("K"), mat("L"), mat("K1"), mat("L2")};
}

inline Json controller_to_json(const ControllerRealization& r, const GainSet& gains, const Json& provenance = Json::object()) {
  const auto& s = r.structure;
  Json j;
  j["format"] = "dlqg-controller";
  j["version"] = 1;
  j["q"] = r.q();
  j["F"] = matrix_to_json(r.F);
  j["G"] = matrix_to_json(r.G);
  j["H"] = matrix_to_json(r.H);
  j["structure"] = {{"zhat", detail::range_to_json(s.zhat)}, {"z", detail::range_to_json(s.z)},
                    {"y1", detail::range_to_json(s.y1)},     {"y2", detail::range_to_json(s.y2)},
                    {"u1", detail::range_to_json(s.u1)},     {"u2", detail::range_to_json(s.u2)}};
  j["gains"] = gains_to_json(gains);
  j["provenance"] = provenance;
  return j;
}

struct ControllerFile {
  ControllerRealization realization;
  GainSet gains;
  Json provenance;
};

inline ControllerFile controller_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("controller document must be a JSON object");
  const Json& fmt = detail::require_field(j, "format");
  if (!fmt.is_string() || fmt.get<std::string>() != "dlqg-controller")
    throw ParseError("field \"format\": expected \"dlqg-controller\"");
  ControllerFile out;
  auto& r = out.realization;
  r.F = matrix_from_json(detail::require_field(j, "F"), "F");
  r.G = matrix_from_json(detail::require_field(j, "G"), "G");
  r.H = matrix_from_json(detail::require_field(j, "H"), "H");
  const Json& q = detail::require_field(j, "q");
  if (!q.is_number_integer() || q.get<int>() != r.F.rows() || r.F.rows() != r.F.cols())
    throw ParseError("field \"q\": must equal the dimension of square F");
  const Json& sj = detail::require_field(j, "structure");
  auto rng = [&](const char* name) { return detail::range_from_json(detail::require_field(sj, name, "structure"), name); };
  r.structure = {rng("zhat"), rng("z"), rng("y1"), rng("y2"), rng("u1"), rng("u2")};
  out.gains = gains_from_json(detail::require_field(j, "gains"));
  out.provenance = j.contains("provenance") ? j.at("provenance") : Json::object();
  return out;
}

inline ControllerFile load_controller(const std::string& path) {
  return controller_from_json(detail::parse_text(detail::read_file(path), path));
}

inline void save_controller(const std::string& path, const ControllerRealization& r, const GainSet& gains,
                            const Json& provenance = Json::object()) {
  detail::write_file(path, controller_to_json(r, gains, provenance).dump(2) + "\n");
}

inline Json to_json(const ValidationReport& rep) {
  Json v = Json::array();
  for (const auto& x : rep.violations) v.push_back({{"code", x.code}, {"message", x.message}});
  return {{"valid", rep.ok()}, {"violations", v}};
}

inline Json to_json(const DecompositionReport& r) {
  return {{"J_total", r.J_total},
          {"J_hat_z", r.J_hat_z},
          {"J_tilde_z", r.J_tilde_z},
          {"J_tilde_x", r.J_tilde_x},
          {"decomposition_error", std::abs(r.J_total - r.sum())},
          {"cross_covariance_norms",
           {{"zhat_ztilde", r.cross_zhat_ztilde},
            {"zhat_xtilde", r.cross_zhat_xtilde},
            {"ztilde_xtilde", r.cross_ztilde_xtilde}}},
          {"xtilde_cov_vs_P", r.xtilde_vs_P}};
}

inline Json to_json(const ComparisonReport& r) {
  return {{"J_central", r.J_central},
          {"J_distributed", r.J_distributed},
          {"J_common_info", r.J_common_info},
          {"J_oracle", r.J_oracle},
          {"horizon", r.horizon},
          {"sandwich_ok", r.sandwich_ok},
          {"sandwich_slack", r.slack},
          {"gaps", {{"central", r.gap_central}, {"common_info", r.gap_common_info}, {"oracle", r.gap_oracle}}}};
}

inline Json to_json(const SimulationResult& r) {
  return {{"empirical_cost", r.empirical_cost},
          {"steps", r.steps},
          {"seed", r.seed},
          {"shards", r.shards},
          {"mean_x", matrix_to_json(r.summary.mean_x)},
          {"mean_u", matrix_to_json(r.summary.mean_u)},
          {"cov_x", matrix_to_json(r.summary.cov_x)},
          {"cov_u", matrix_to_json(r.summary.cov_u)}};
}

inline Json to_json(const GainDiagnostics& g) {
  return {{"radii",
           {{"estimation", g.radius_estimation},
            {"control", g.radius_control},
            {"coupled", g.radius_coupled},
            {"controller", g.radius_controller}}},
          {"residuals", {{"P", g.residual_P}, {"Pi", g.residual_Pi}, {"P1", g.residual_P1}, {"Pi2", g.residual_Pi2}}},
          {"coupled_iterations", g.coupled_iterations},
          {"coupled_final_step", g.coupled_final_step},
          {"coupled_fallback_start", g.coupled_fallback_start}};
}

}  // namespace dlqg
