#pragma once

#include <iosfwd>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "robustify/network.hpp"

namespace robustify {

/// Linear plant w+ = A w + B v with finite-horizon quadratic cost
///   J = sum_{i=1}^{N-1} w_i' Q w_i + w_N' P w_N + sum_{i=0}^{N-1} v_i' R v_i
/// and input saturation |v_i| <= v_bound.
struct MpcProblem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd P;
  int N = 1;
  double v_bound = 1.0;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }

  /// Throws DimensionMismatch or NonPositiveDefinite.
  void validate() const;

  /// Second-order plant with the horizon-10, |v| <= 10 settings.
  static MpcProblem default_preset();
};

/// minimize V' H V + 2 w' F' V  subject to  G V <= S_v w + c.
/// `state_cost` is the constant w' C w that completes the rolled-out cost.
struct CondensedQP {
  Eigen::MatrixXd H;
  Eigen::MatrixXd F;
  Eigen::MatrixXd G;
  Eigen::MatrixXd S_v;
  Eigen::VectorXd c;
  Eigen::MatrixXd state_cost;

  int num_inputs() const { return static_cast<int>(H.rows()); }
  int state_dim() const { return static_cast<int>(F.cols()); }
  double cost(const Eigen::VectorXd& w, const Eigen::VectorXd& V) const;
};

/// Eliminates the states. Throws NonPositiveDefinite if H is not positive
/// definite.
CondensedQP condense_qp(const MpcProblem& mpc);

/// Writes the KKT conditions of the QP as an equilibrium network whose state
/// is the constraint multiplier:
///   W_x = I - G H^-1 G',  W_u = -(S_v + G H^-1 F),  b = -c,
///   W_fx = -H^-1 G',      W_fu = -H^-1 F,           b_f = 0.
/// Throws SingularMatrix when H cannot be inverted.
ImplicitNetwork qp_to_implicit_network(const CondensedQP& qp);

struct QpOracleOptions {
  double tol = 1e-8;
  int max_iters = 100000;
  double rho = 0.1;
  double sigma = 1e-6;
};

struct QpSolution {
  Eigen::VectorXd v;
  Eigen::VectorXd lambda;  // H v + F w + G' lambda = 0
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Operator splitting (ADMM) on the box-constrained QP, then an exact
/// active-set polish. Independent of the network pathway. Throws
/// MaxIterations when the KKT residual does not reach opts.tol.
QpSolution solve_qp_oracle(const CondensedQP& qp, const Eigen::VectorXd& w,
                           const QpOracleOptions& opts = {});

/// Max of stationarity, primal feasibility, dual feasibility and
/// complementarity violations.
double qp_kkt_residual(const CondensedQP& qp, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& v, const Eigen::VectorXd& lambda);

struct NetworkPolicy {
  ImplicitNetwork net;
  FixedPointConfig cfg;
};

struct QpPolicy {
  CondensedQP qp;
  QpOracleOptions opts;
};

using Policy = std::variant<NetworkPolicy, QpPolicy>;

/// Full input sequence the policy returns at state w.
Eigen::VectorXd policy_sequence(const Policy& policy, const Eigen::VectorXd& w);

struct Trajectory {
  std::vector<Eigen::VectorXd> w;  // steps + 1 states
  std::vector<Eigen::VectorXd> v;  // steps applied inputs
};

/// Receding horizon: applies the first input of each sequence.
Trajectory simulate_closed_loop(const MpcProblem& mpc, const Policy& policy,
                                const Eigen::VectorXd& w0, int steps);

/// Max |difference| over all states and inputs of equal-length runs.
double trajectory_deviation(const Trajectory& a, const Trajectory& b);

/// Columns k, w1..wn, v1..vm (a single input is named v). The final state
/// row carries empty input cells.
void write_trajectory_csv(std::ostream& out, const Trajectory& t,
                          bool timestamp);

}  // namespace robustify
