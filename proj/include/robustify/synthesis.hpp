#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "robustify/conic.hpp"
#include "robustify/multipliers.hpp"
#include "robustify/network.hpp"

namespace robustify {

/// Objective w0 * gamma + w1 * gamma_u1 + w2 * gamma_u2.
struct ObjectiveWeights {
  double w0 = 1.0;
  double w1 = 1.0;
  double w2 = 1.0;

  void validate() const;
};

/// Element-wise closeness of the robustified weights to the original ones.
struct SimilarityTolerances {
  double eps_Wx = 0.0;
  double eps_Wu = 0.0;
  double eps_Wfx = 0.0;
  double eps_Wfu = 0.0;

  static SimilarityTolerances uniform(double eps) { return {eps, eps, eps, eps}; }
  bool all_zero() const {
    return eps_Wx == 0.0 && eps_Wu == 0.0 && eps_Wfx == 0.0 && eps_Wfu == 0.0;
  }
  void validate() const;
};

struct SynthesisProblem {
  ImplicitNetwork original;
  InputPairSet pairset;
  ObjectiveWeights weights;
  SimilarityTolerances tols;
  /// The strict LMI is imposed as  M(theta) <= -strictness_shift * I.
  /// With all tolerances zero the weights are pinned to the original ones,
  /// the programme is the analysis programme, and it is posed with a zero
  /// shift like analyze_network: networks such as the MPC policy have no
  /// strictly feasible multipliers at all.
  double strictness_shift = 1e-8;
  double t_floor = 1e-6;  // lower bound on diagonal multipliers
  std::optional<double> fixed_gamma_u1;
  std::optional<double> fixed_gamma_u2;

  void validate() const;
  double effective_shift() const {
    return tols.all_zero() ? 0.0 : strictness_shift;
  }
};

/// Returns a copy of `prob` with the given input gains pinned by equality
/// constraints; nullopt leaves a gain free.
SynthesisProblem fix_gains_mode(SynthesisProblem prob,
                                std::optional<double> fix_gamma_u1,
                                std::optional<double> fix_gamma_u2);

struct IndexRange {
  int begin = 0;
  int size = 0;

  int end() const { return begin + size; }
  int operator[](int k) const { return begin + k; }
};

/// Decision vector order: diag T_z, diag T_g, T_u1, T_u2, Y_z (row-major),
/// Y_u, Y_gz, Y_gu, gamma, gamma_u1, gamma_u2.
struct VariableLayout {
  Dims dims;
  IndexRange T_z, T_g, T_u1, T_u2, Y_z, Y_u, Y_gz, Y_gu, gamma, gamma_u1,
      gamma_u2;
  int total = 0;

  int y_z(int i, int j) const { return Y_z[i * dims.n + j]; }
  int y_u(int i, int k) const { return Y_u[i * dims.n_u + k]; }
  int y_gz(int i, int j) const { return Y_gz[i * dims.n + j]; }
  int y_gu(int i, int k) const { return Y_gu[i * dims.n_u + k]; }
};

VariableLayout layout_variables(const Dims& dims);

/// One PSD block -(Omega_z' + Omega_g' + Omega_u + Omega_gamma) - shift*I of
/// size N_p, the element-wise closeness constraints (scaled by the
/// multipliers; equalities when a tolerance is zero), bounds, pinned gains
/// and the weighted objective. Variables follow layout_variables.
ConicProgram assemble_synthesis_sdp(const SynthesisProblem& prob);

struct SynthesisSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::string message;
  MultiplierSet multipliers;
  Eigen::MatrixXd Y_z, Y_u, Y_gz, Y_gu;
  RobustnessCertificate certificate;
  ImplicitNetwork robustified;
  double objective_value = 0.0;
  SolverResult solver;

  /// max |Psi - W| over the four weight matrices.
  double max_weight_deviation(const ImplicitNetwork& original) const;
};

/// Splits a decision vector and recovers the weights Psi = T^-1 Y; biases
/// and activation come from `original`.
SynthesisSolution decode_solution(const SynthesisProblem& prob,
                                  const Eigen::VectorXd& theta);

/// Solves the synthesis programme; failures are reported in `status`. With
/// all tolerances zero the equalities Y = T W are substituted out and the
/// analysis programme is solved instead.
SynthesisSolution synthesize(const SynthesisProblem& prob,
                             ConicBackend& backend,
                             const SolverOptions& opts = {});

/// The LMI matrix Omega_z' + Omega_g' + Omega_u + Omega_gamma at a point,
/// built from the quadratic-form constructors.
Eigen::MatrixXd lmi_matrix(const SynthesisSolution& sol,
                           const InputPairSet& pairset, const Dims& dims);

struct AnalysisOptions {
  double strictness_shift = 0.0;
  double t_floor = 1e-6;
  std::optional<double> fixed_gamma_u1;
  std::optional<double> fixed_gamma_u2;
};

struct AnalysisResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::string message;
  RobustnessCertificate certificate;
  MultiplierSet multipliers;
  double objective_value = 0.0;
  SolverResult solver;
};

/// Certifies fixed weights: the products T * W replace the free Y, leaving
/// multipliers and gains as the only variables.
ConicProgram assemble_analysis_sdp(const ImplicitNetwork& net,
                                   const InputPairSet& pairset,
                                   const ObjectiveWeights& weights,
                                   const AnalysisOptions& aopts);

AnalysisResult analyze_network(const ImplicitNetwork& net,
                               const InputPairSet& pairset,
                               const ObjectiveWeights& weights,
                               ConicBackend& backend,
                               const AnalysisOptions& aopts = {},
                               const SolverOptions& opts = {});

nlohmann::json problem_to_json(const SynthesisProblem& prob);
SynthesisProblem problem_from_json(const nlohmann::json& j);
nlohmann::json solution_to_json(const SynthesisSolution& sol,
                                const ImplicitNetwork& original);
nlohmann::json certificate_to_json(const RobustnessCertificate& c);
RobustnessCertificate certificate_from_json(const nlohmann::json& j);

}  // namespace robustify
