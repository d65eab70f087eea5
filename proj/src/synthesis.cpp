#include "robustify/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"
#include "robustify/network_io.hpp"

namespace robustify {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Term {
  int var;
  double coef;
};
using Expr = std::vector<Term>;
using ExprFn = std::function<Expr(int, int)>;

VariableLayout make_layout(const Dims& d, bool with_y) {
  VariableLayout L;
  L.dims = d;
  int next = 0;
  auto take = [&next](int size) {
    IndexRange r{next, size};
    next += size;
    return r;
  };
  L.T_z = take(d.n);
  L.T_g = take(d.n_g);
  L.T_u1 = take(1);
  L.T_u2 = take(1);
  L.Y_z = take(with_y ? d.n * d.n : 0);
  L.Y_u = take(with_y ? d.n * d.n_u : 0);
  L.Y_gz = take(with_y ? d.n_g * d.n : 0);
  L.Y_gu = take(with_y ? d.n_g * d.n_u : 0);
  L.gamma = take(1);
  L.gamma_u1 = take(1);
  L.gamma_u2 = take(1);
  L.total = next;
  return L;
}

// The LMI block F(theta) = -M(theta) - shift * I, where M is the sum of the
// four quadratic forms. `yz` etc. give the affine expression standing in for
// each entry of the Y matrices.
PsdConstraint build_lmi(const VariableLayout& L, const InputPairSet& pairset,
                        double shift, const ExprFn& yz, const ExprFn& yu,
                        const ExprFn& ygz, const ExprFn& ygu) {
  const Dims& d = L.dims;
  PsdConstraint blk(d.N_p());
  // Adds value * var to M at (r, c) (and its mirror).
  auto add_m = [&blk](int r, int c, int var, double value) {
    if (value != 0.0) blk.add(var, r, c, -value);
  };
  auto add_expr = [&](int r, int c, const Expr& e, double scale) {
    for (const Term& t : e) add_m(r, c, t.var, scale * t.coef);
  };

  // State block: He(Y_z - T_z) and Y_u.
  for (int i = 0; i < d.n; ++i) {
    const int zi = d.z() + i;
    add_expr(zi, zi, yz(i, i), 2.0);
    add_m(zi, zi, L.T_z[i], -2.0);
    for (int j = i + 1; j < d.n; ++j) {
      add_expr(zi, d.z() + j, yz(i, j), 1.0);
      add_expr(zi, d.z() + j, yz(j, i), 1.0);
    }
    for (int k = 0; k < d.n_u; ++k) add_expr(zi, d.u() + k, yu(i, k), 1.0);
  }
  // Output slope restriction.
  for (int i = 0; i < d.n_g; ++i) {
    const int gp = d.g_plus() + i;
    const int gm = d.g_minus() + i;
    add_m(gp, gp, L.T_g[i], -1.0);
    add_m(gm, gm, L.T_g[i], -1.0);
    for (int j = 0; j < d.n; ++j) {
      const Expr e = ygz(i, j);
      add_expr(gp, d.z() + j, e, 1.0);
      add_expr(gm, d.z() + j, e, -1.0);
    }
    for (int k = 0; k < d.n_u; ++k) {
      const Expr e = ygu(i, k);
      add_expr(gp, d.u() + k, e, 1.0);
      add_expr(gm, d.u() + k, e, -1.0);
    }
  }
  // Input-pair set and performance terms.
  const int one = d.one();
  for (int i = 0; i < 2 * d.n_u; ++i) {
    const int r = d.u_plus() + i;
    add_m(r, r, L.T_u2[0], -0.5);
    add_m(r, r, L.gamma_u2[0], -0.5);
    add_m(r, one, L.T_u1[0], -0.5);
    add_m(r, one, L.gamma_u1[0], -0.5);
  }
  for (int k = 0; k < d.n_u; ++k) {
    const int r = d.u() + k;
    add_m(r, r, L.T_u2[0], -0.5);
    add_m(r, r, L.gamma_u2[0], -0.5);
  }
  add_m(one, one, L.T_u1[0], pairset.eps_u1);
  add_m(one, one, L.T_u2[0], pairset.eps_u2);
  add_m(one, one, L.gamma[0], -1.0);
  for (int i = 0; i < 2 * d.n_g; ++i) blk.add_constant(d.g_plus() + i, one, -0.5);
  if (shift != 0.0) {
    for (int i = 0; i < d.N_p(); ++i) blk.add_constant(i, i, -shift);
  }
  blk.compress();
  return blk;
}

LinearRow row(std::vector<std::pair<int, double>> coeffs, double rhs) {
  LinearRow r;
  r.coeffs = std::move(coeffs);
  r.rhs = rhs;
  return r;
}

void add_common(ConicProgram& prog, const VariableLayout& L,
                const ObjectiveWeights& w, double t_floor,
                const std::optional<double>& fix1,
                const std::optional<double>& fix2) {
  prog.num_vars = L.total;
  prog.objective = VectorXd::Zero(L.total);
  prog.objective(L.gamma[0]) = w.w0;
  prog.objective(L.gamma_u1[0]) = w.w1;
  prog.objective(L.gamma_u2[0]) = w.w2;
  for (int i = 0; i < L.T_z.size; ++i) {
    prog.inequalities.push_back(row({{L.T_z[i], -1.0}}, -t_floor));
  }
  for (int i = 0; i < L.T_g.size; ++i) {
    prog.inequalities.push_back(row({{L.T_g[i], -1.0}}, -t_floor));
  }
  for (const IndexRange* r : {&L.T_u1, &L.T_u2, &L.gamma, &L.gamma_u1, &L.gamma_u2}) {
    prog.inequalities.push_back(row({{(*r)[0], -1.0}}, 0.0));
  }
  if (fix1) prog.equalities.push_back(row({{L.gamma_u1[0], 1.0}}, *fix1));
  if (fix2) prog.equalities.push_back(row({{L.gamma_u2[0], 1.0}}, *fix2));
}

void check_fixed(const std::optional<double>& v, const char* what) {
  if (v && !(*v >= 0.0)) {
    throw std::invalid_argument(std::string(what) + " must be nonnegative");
  }
}

}  // namespace

void ObjectiveWeights::validate() const {
  if (!(w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)) {
    throw std::invalid_argument("objective weights must be nonnegative");
  }
  if (w0 == 0.0 && w1 == 0.0 && w2 == 0.0) {
    throw std::invalid_argument("objective weights must not all be zero");
  }
}

void SimilarityTolerances::validate() const {
  if (!(eps_Wx >= 0.0 && eps_Wu >= 0.0 && eps_Wfx >= 0.0 && eps_Wfu >= 0.0)) {
    throw std::invalid_argument("similarity tolerances must be nonnegative");
  }
}

void SynthesisProblem::validate() const {
  original.validate();
  pairset.validate();
  weights.validate();
  tols.validate();
  if (!(strictness_shift > 0.0)) {
    throw std::invalid_argument("strictness shift must be positive");
  }
  if (!(t_floor > 0.0)) throw std::invalid_argument("t_floor must be positive");
  check_fixed(fixed_gamma_u1, "fixed gamma_u1");
  check_fixed(fixed_gamma_u2, "fixed gamma_u2");
}

SynthesisProblem fix_gains_mode(SynthesisProblem prob,
                                std::optional<double> fix_gamma_u1,
                                std::optional<double> fix_gamma_u2) {
  check_fixed(fix_gamma_u1, "fixed gamma_u1");
  check_fixed(fix_gamma_u2, "fixed gamma_u2");
  if (fix_gamma_u1) prob.fixed_gamma_u1 = fix_gamma_u1;
  if (fix_gamma_u2) prob.fixed_gamma_u2 = fix_gamma_u2;
  return prob;
}

VariableLayout layout_variables(const Dims& dims) {
  if (dims.n < 0 || dims.n_u < 0 || dims.n_g < 0) {
    throw DimensionMismatch("negative dimension");
  }
  return make_layout(dims, true);
}

ConicProgram assemble_synthesis_sdp(const SynthesisProblem& prob) {
  prob.validate();
  const Dims d(prob.original.dims());
  const VariableLayout L = layout_variables(d);
  ConicProgram prog;
  add_common(prog, L, prob.weights, prob.t_floor, prob.fixed_gamma_u1,
             prob.fixed_gamma_u2);
  auto single = [](int var) { return Expr{{var, 1.0}}; };
  prog.psd_blocks.push_back(build_lmi(
      L, prob.pairset, prob.effective_shift(),
      [&](int i, int j) { return single(L.y_z(i, j)); },
      [&](int i, int k) { return single(L.y_u(i, k)); },
      [&](int i, int j) { return single(L.y_gz(i, j)); },
      [&](int i, int k) { return single(L.y_gu(i, k)); }));

  // -eps T_ii <= Y_ij - T_ii W_ij <= eps T_ii, an equality when eps = 0.
  auto closeness = [&](const MatrixXd& W, double eps, const IndexRange& T,
                       const std::function<int(int, int)>& yidx) {
    for (int i = 0; i < W.rows(); ++i) {
      for (int j = 0; j < W.cols(); ++j) {
        const int y = yidx(i, j);
        const int t = T[i];
        if (eps == 0.0) {
          prog.equalities.push_back(row({{y, 1.0}, {t, -W(i, j)}}, 0.0));
        } else {
          prog.inequalities.push_back(row({{y, 1.0}, {t, -(W(i, j) + eps)}}, 0.0));
          prog.inequalities.push_back(row({{y, -1.0}, {t, W(i, j) - eps}}, 0.0));
        }
      }
    }
  };
  const ImplicitNetwork& f = prob.original;
  closeness(f.state_weights, prob.tols.eps_Wx, L.T_z,
            [&](int i, int j) { return L.y_z(i, j); });
  closeness(f.input_weights, prob.tols.eps_Wu, L.T_z,
            [&](int i, int k) { return L.y_u(i, k); });
  closeness(f.output_state_weights, prob.tols.eps_Wfx, L.T_g,
            [&](int i, int j) { return L.y_gz(i, j); });
  closeness(f.output_input_weights, prob.tols.eps_Wfu, L.T_g,
            [&](int i, int k) { return L.y_gu(i, k); });
  return prog;
}

ConicProgram assemble_analysis_sdp(const ImplicitNetwork& net,
                                   const InputPairSet& pairset,
                                   const ObjectiveWeights& weights,
                                   const AnalysisOptions& aopts) {
  net.validate();
  pairset.validate();
  weights.validate();
  check_fixed(aopts.fixed_gamma_u1, "fixed gamma_u1");
  check_fixed(aopts.fixed_gamma_u2, "fixed gamma_u2");
  const Dims d(net.dims());
  const VariableLayout L = make_layout(d, false);
  ConicProgram prog;
  add_common(prog, L, weights, aopts.t_floor, aopts.fixed_gamma_u1,
             aopts.fixed_gamma_u2);
  auto scaled = [](int var, double w) {
    return w == 0.0 ? Expr{} : Expr{{var, w}};
  };
  prog.psd_blocks.push_back(build_lmi(
      L, pairset, aopts.strictness_shift,
      [&](int i, int j) { return scaled(L.T_z[i], net.state_weights(i, j)); },
      [&](int i, int k) { return scaled(L.T_z[i], net.input_weights(i, k)); },
      [&](int i, int j) {
        return scaled(L.T_g[i], net.output_state_weights(i, j));
      },
      [&](int i, int k) {
        return scaled(L.T_g[i], net.output_input_weights(i, k));
      }));
  return prog;
}

double SynthesisSolution::max_weight_deviation(
    const ImplicitNetwork& original) const {
  auto dev = [](const MatrixXd& a, const MatrixXd& b) {
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
  };
  return std::max({dev(robustified.state_weights, original.state_weights),
                   dev(robustified.input_weights, original.input_weights),
                   dev(robustified.output_state_weights,
                       original.output_state_weights),
                   dev(robustified.output_input_weights,
                       original.output_input_weights)});
}

SynthesisSolution decode_solution(const SynthesisProblem& prob,
                                  const VectorXd& theta) {
  const Dims d(prob.original.dims());
  const VariableLayout L = layout_variables(d);
  if (theta.size() != L.total) throw DimensionMismatch("decision vector size");
  SynthesisSolution sol;
  sol.multipliers.T_z = theta.segment(L.T_z.begin, L.T_z.size);
  sol.multipliers.T_g = theta.segment(L.T_g.begin, L.T_g.size);
  sol.multipliers.T_u1 = theta(L.T_u1[0]);
  sol.multipliers.T_u2 = theta(L.T_u2[0]);
  auto unpack = [&](const IndexRange& r, int rows, int cols) {
    MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) M(i, j) = theta(r[i * cols + j]);
    return M;
  };
  sol.Y_z = unpack(L.Y_z, d.n, d.n);
  sol.Y_u = unpack(L.Y_u, d.n, d.n_u);
  sol.Y_gz = unpack(L.Y_gz, d.n_g, d.n);
  sol.Y_gu = unpack(L.Y_gu, d.n_g, d.n_u);
  sol.certificate = {theta(L.gamma[0]), theta(L.gamma_u1[0]),
                     theta(L.gamma_u2[0])};
  const ObjectiveWeights& w = prob.weights;
  sol.objective_value = w.w0 * sol.certificate.gamma +
                        w.w1 * sol.certificate.gamma_u1 +
                        w.w2 * sol.certificate.gamma_u2;
  ImplicitNetwork g = prob.original;
  const VectorXd tz_inv = sol.multipliers.T_z.cwiseInverse();
  const VectorXd tg_inv = sol.multipliers.T_g.cwiseInverse();
  g.state_weights = tz_inv.asDiagonal() * sol.Y_z;
  g.input_weights = tz_inv.asDiagonal() * sol.Y_u;
  g.output_state_weights = tg_inv.asDiagonal() * sol.Y_gz;
  g.output_input_weights = tg_inv.asDiagonal() * sol.Y_gu;
  sol.robustified = std::move(g);
  return sol;
}

SynthesisSolution synthesize(const SynthesisProblem& prob,
                             ConicBackend& backend,
                             const SolverOptions& opts) {
  if (prob.tols.all_zero()) {
    // Y = T W is forced, so eliminate it up front: the same programme without
    // the equality block, which otherwise costs the solver several digits.
    prob.validate();
    AnalysisOptions ao;
    ao.strictness_shift = prob.effective_shift();
    ao.t_floor = prob.t_floor;
    ao.fixed_gamma_u1 = prob.fixed_gamma_u1;
    ao.fixed_gamma_u2 = prob.fixed_gamma_u2;
    AnalysisResult an = analyze_network(prob.original, prob.pairset, prob.weights,
                                        backend, ao, opts);
    SynthesisSolution sol;
    sol.status = an.status;
    sol.message = an.message;
    sol.robustified = prob.original;
    sol.multipliers = an.multipliers;
    sol.certificate = an.certificate;
    sol.objective_value = an.objective_value;
    if (an.multipliers.T_z.size() == prob.original.dims().n) {
      const ImplicitNetwork& w = prob.original;
      sol.Y_z = an.multipliers.T_z.asDiagonal() * w.state_weights;
      sol.Y_u = an.multipliers.T_z.asDiagonal() * w.input_weights;
      sol.Y_gz = an.multipliers.T_g.asDiagonal() * w.output_state_weights;
      sol.Y_gu = an.multipliers.T_g.asDiagonal() * w.output_input_weights;
    }
    sol.solver = std::move(an.solver);
    return sol;
  }
  const ConicProgram prog = assemble_synthesis_sdp(prob);
  SolverResult res = backend.solve(prog, opts);
  SynthesisSolution sol;
  if (res.theta.size() == prog.num_vars) {
    sol = decode_solution(prob, res.theta);
  } else {
    sol.robustified = prob.original;
  }
  sol.status = res.status;
  sol.message = res.message;
  if (res.status == SolveStatus::kOptimal && !sol.robustified.state_weights.allFinite()) {
    sol.status = SolveStatus::kNumericalFailure;
    sol.message = "multipliers too small to recover the weights";
  }
  sol.solver = std::move(res);
  return sol;
}

MatrixXd lmi_matrix(const SynthesisSolution& sol, const InputPairSet& pairset,
                    const Dims& dims) {
  const MultiplierSet& m = sol.multipliers;
  const RobustnessCertificate& c = sol.certificate;
  return build_omega_z_check(m.T_z, sol.Y_z, sol.Y_u, dims).M +
         build_omega_g_check(m.T_g, sol.Y_gz, sol.Y_gu, dims).M +
         build_omega_u(m.T_u1, m.T_u2, pairset, dims).M +
         build_omega_gamma(c.gamma, c.gamma_u1, c.gamma_u2, dims).M;
}

AnalysisResult analyze_network(const ImplicitNetwork& net,
                               const InputPairSet& pairset,
                               const ObjectiveWeights& weights,
                               ConicBackend& backend,
                               const AnalysisOptions& aopts,
                               const SolverOptions& opts) {
  const ConicProgram prog = assemble_analysis_sdp(net, pairset, weights, aopts);
  const VariableLayout L = make_layout(Dims(net.dims()), false);
  AnalysisResult out;
  out.solver = backend.solve(prog, opts);
  out.status = out.solver.status;
  out.message = out.solver.message;
  const VectorXd& th = out.solver.theta;
  if (th.size() == L.total) {
    out.multipliers.T_z = th.segment(L.T_z.begin, L.T_z.size);
    out.multipliers.T_g = th.segment(L.T_g.begin, L.T_g.size);
    out.multipliers.T_u1 = th(L.T_u1[0]);
    out.multipliers.T_u2 = th(L.T_u2[0]);
    out.certificate = {th(L.gamma[0]), th(L.gamma_u1[0]), th(L.gamma_u2[0])};
    out.objective_value = weights.w0 * out.certificate.gamma +
                          weights.w1 * out.certificate.gamma_u1 +
                          weights.w2 * out.certificate.gamma_u2;
  }
  return out;
}

nlohmann::json certificate_to_json(const RobustnessCertificate& c) {
  return {{"gamma", c.gamma}, {"gamma_u1", c.gamma_u1}, {"gamma_u2", c.gamma_u2}};
}

RobustnessCertificate certificate_from_json(const nlohmann::json& j) {
  try {
    return {j.at("gamma").get<double>(), j.at("gamma_u1").get<double>(),
            j.at("gamma_u2").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("certificate: ") + e.what());
  }
}

nlohmann::json problem_to_json(const SynthesisProblem& p) {
  nlohmann::json j;
  j["original"] = network_to_json(p.original);
  j["pairset"] = {{"eps_u1", p.pairset.eps_u1}, {"eps_u2", p.pairset.eps_u2}};
  j["weights"] = {{"w0", p.weights.w0}, {"w1", p.weights.w1}, {"w2", p.weights.w2}};
  j["tolerances"] = {{"eps_Wx", p.tols.eps_Wx},
                     {"eps_Wu", p.tols.eps_Wu},
                     {"eps_Wfx", p.tols.eps_Wfx},
                     {"eps_Wfu", p.tols.eps_Wfu}};
  j["strictness_shift"] = p.strictness_shift;
  j["t_floor"] = p.t_floor;
  j["fixed_gamma_u1"] = p.fixed_gamma_u1 ? nlohmann::json(*p.fixed_gamma_u1)
                                         : nlohmann::json(nullptr);
  j["fixed_gamma_u2"] = p.fixed_gamma_u2 ? nlohmann::json(*p.fixed_gamma_u2)
                                         : nlohmann::json(nullptr);
  return j;
}

SynthesisProblem problem_from_json(const nlohmann::json& j) {
  try {
    SynthesisProblem p;
    p.original = network_from_json(j.at("original"));
    p.pairset = {j.at("pairset").at("eps_u1").get<double>(),
                 j.at("pairset").at("eps_u2").get<double>()};
    const auto& w = j.at("weights");
    p.weights = {w.at("w0").get<double>(), w.at("w1").get<double>(),
                 w.at("w2").get<double>()};
    const auto& t = j.at("tolerances");
    p.tols = {t.at("eps_Wx").get<double>(), t.at("eps_Wu").get<double>(),
              t.at("eps_Wfx").get<double>(), t.at("eps_Wfu").get<double>()};
    p.strictness_shift = j.at("strictness_shift").get<double>();
    p.t_floor = j.at("t_floor").get<double>();
    if (!j.at("fixed_gamma_u1").is_null()) p.fixed_gamma_u1 = j["fixed_gamma_u1"].get<double>();
    if (!j.at("fixed_gamma_u2").is_null()) p.fixed_gamma_u2 = j["fixed_gamma_u2"].get<double>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("synthesis problem: ") + e.what());
  }
}

nlohmann::json solution_to_json(const SynthesisSolution& sol,
                                const ImplicitNetwork& original) {
  nlohmann::json j;
  j["status"] = to_string(sol.status);
  j["message"] = sol.message;
  j["certificate"] = certificate_to_json(sol.certificate);
  j["objective_value"] = sol.objective_value;
  j["multipliers"] = {{"T_z", vector_to_json(sol.multipliers.T_z)},
                      {"T_g", vector_to_json(sol.multipliers.T_g)},
                      {"T_u1", sol.multipliers.T_u1},
                      {"T_u2", sol.multipliers.T_u2}};
  j["Y_z"] = matrix_to_json(sol.Y_z);
  j["Y_u"] = matrix_to_json(sol.Y_u);
  j["Y_gz"] = matrix_to_json(sol.Y_gz);
  j["Y_gu"] = matrix_to_json(sol.Y_gu);
  j["max_weight_deviation"] = sol.max_weight_deviation(original);
  j["solver_iterations"] = sol.solver.iterations;
  j["robustified"] = network_to_json(sol.robustified);
  return j;
}

}  // namespace robustify
