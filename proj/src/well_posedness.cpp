#include "robustify/well_posedness.hpp"

#include "robustify/errors.hpp"

namespace robustify {

WellPosednessResult well_posedness_certificate(const Eigen::MatrixXd& W_x,
                                               ConicBackend& backend,
                                               double t_floor, double threshold,
                                               const SolverOptions& opts) {
  if (W_x.rows() != W_x.cols()) throw DimensionMismatch("W_x must be square");
  const int n = static_cast<int>(W_x.rows());
  WellPosednessResult out;
  if (n == 0) {
    out.certified = true;
    out.status = SolveStatus::kOptimal;
    return out;
  }
  // Variables: T_1..T_n, margin t.
  ConicProgram prog;
  prog.num_vars = n + 1;
  prog.objective = Eigen::VectorXd::Zero(n + 1);
  prog.objective(n) = -1.0;
  PsdConstraint blk(n);
  // He(T (I - W)) - t I: entry (i, j) gets T_i (d_ij - W_ij) + T_j (d_ji - W_ji).
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double dij = (i == j ? 1.0 : 0.0) - W_x(i, j);
      const double dji = (i == j ? 1.0 : 0.0) - W_x(j, i);
      if (i == j) {
        blk.add(i, i, i, 2.0 * dij);
      } else {
        blk.add(i, i, j, dij);
        blk.add(j, i, j, dji);
      }
    }
    blk.add(n, i, i, -1.0);
  }
  prog.psd_blocks.push_back(blk);
  LinearRow sum;
  for (int i = 0; i < n; ++i) {
    sum.coeffs.emplace_back(i, 1.0);
    LinearRow lb;
    lb.coeffs.emplace_back(i, -1.0);
    lb.rhs = -t_floor;
    prog.inequalities.push_back(lb);
  }
  sum.rhs = n;
  prog.equalities.push_back(sum);
  const SolverResult res = backend.solve(prog, opts);
  out.status = res.status;
  out.message = res.message;
  if (res.theta.size() == n + 1) {
    out.T = res.theta.head(n);
    out.margin = res.theta(n);
  }
  out.certified = res.status == SolveStatus::kOptimal && out.margin > threshold;
  return out;
}

}  // namespace robustify
