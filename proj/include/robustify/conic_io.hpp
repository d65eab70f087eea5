#pragma once

#include <string>

#include <json.hpp>

#include "robustify/conic.hpp"

namespace robustify {

/// Interchange document:
///   {"num_vars": n, "objective": [...],
///    "equalities":   [{"coeffs": [[j, a], ...], "rhs": r}, ...],
///    "inequalities": [...same...],
///    "psd_blocks": [{"dim": k, "constant": [[i, j, v], ...],
///                    "terms": [{"var": j, "entries": [[i, j, v], ...]}]}]}
/// Triplets list the upper triangle only.
nlohmann::json program_to_json(const ConicProgram& prog);
ConicProgram program_from_json(const nlohmann::json& j);

nlohmann::json result_to_json(const SolverResult& res);

}  // namespace robustify
