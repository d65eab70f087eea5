#include "robustify/conic_io.hpp"

#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"

namespace robustify {

using nlohmann::json;

namespace {

json rows_to_json(const std::vector<LinearRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json coeffs = json::array();
    for (const auto& [j, a] : r.coeffs) coeffs.push_back({j, a});
    out.push_back({{"coeffs", coeffs}, {"rhs", r.rhs}});
  }
  return out;
}

json triplets(const SparseSymMatrix& m) {
  json out = json::array();
  for (const auto& e : m.entries()) out.push_back({e.row, e.col, e.value});
  return out;
}

std::vector<LinearRow> rows_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array");
  std::vector<LinearRow> rows;
  for (const auto& r : j) {
    LinearRow row;
    row.rhs = r.at("rhs").get<double>();
    for (const auto& c : r.at("coeffs")) {
      row.coeffs.emplace_back(c.at(0).get<int>(), c.at(1).get<double>());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json program_to_json(const ConicProgram& prog) {
  json j;
  j["num_vars"] = prog.num_vars;
  j["objective"] = vector_to_json(prog.objective);
  j["equalities"] = rows_to_json(prog.equalities);
  j["inequalities"] = rows_to_json(prog.inequalities);
  json blocks = json::array();
  for (const auto& b : prog.psd_blocks) {
    json terms = json::array();
    for (const auto& [var, F] : b.terms) {
      terms.push_back({{"var", var}, {"entries", triplets(F)}});
    }
    blocks.push_back(
        {{"dim", b.dim}, {"constant", triplets(b.constant)}, {"terms", terms}});
  }
  j["psd_blocks"] = blocks;
  return j;
}

ConicProgram program_from_json(const json& j) {
  try {
    ConicProgram prog;
    prog.num_vars = j.at("num_vars").get<int>();
    prog.objective = vector_from_json(j.at("objective"), "objective", prog.num_vars);
    prog.equalities = rows_from_json(j.at("equalities"), "equalities");
    prog.inequalities = rows_from_json(j.at("inequalities"), "inequalities");
    for (const auto& bj : j.at("psd_blocks")) {
      PsdConstraint b(bj.at("dim").get<int>());
      for (const auto& t : bj.at("constant")) {
        b.add_constant(t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
      }
      for (const auto& term : bj.at("terms")) {
        const int var = term.at("var").get<int>();
        for (const auto& t : term.at("entries")) {
          b.add(var, t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>());
        }
      }
      prog.psd_blocks.push_back(std::move(b));
    }
    prog.validate();
    return prog;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("conic program: ") + e.what());
  }
}

json result_to_json(const SolverResult& res) {
  return {{"status", to_string(res.status)},
          {"theta", vector_to_json(res.theta)},
          {"objective_value", res.objective_value},
          {"dual_objective", res.dual_objective},
          {"min_eigenvalue", res.min_eigenvalue},
          {"ineq_violation", res.ineq_violation},
          {"eq_violation", res.eq_violation},
          {"rel_primal_residual", res.rel_primal_residual},
          {"rel_dual_residual", res.rel_dual_residual},
          {"rel_gap", res.rel_gap},
          {"iterations", res.iterations},
          {"message", res.message}};
}

}  // namespace robustify
