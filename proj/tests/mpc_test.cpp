#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "robustify/errors.hpp"
#include "robustify/mpc.hpp"
#include "support.hpp"

namespace robustify {
namespace {

// Cost of the plant rollout: Q on w_1..w_{N-1}, P on w_N, R on every input.
double rolled_out_cost(const MpcProblem& m, const Eigen::VectorXd& w0, const Eigen::VectorXd& V) {
  Eigen::VectorXd w = w0;
  double J = 0.0;
  const int nv = m.input_dim();
  for (int i = 0; i < m.N; ++i) {
    const Eigen::VectorXd v = V.segment(i * nv, nv);
    J += v.dot(m.R * v);
    w = m.A * w + m.B * v;
    J += w.dot((i + 1 < m.N ? m.Q : m.P) * w);
  }
  return J;
}

// Stabilizing solution of the discrete algebraic Riccati equation by
// fixed-point iteration of the Riccati difference equation.
Eigen::MatrixXd dare(const MpcProblem& m) {
  Eigen::MatrixXd P = m.Q;
  for (int k = 0; k < 10000; ++k) {
    const Eigen::MatrixXd K =
        (m.R + m.B.transpose() * P * m.B).ldlt().solve(m.B.transpose() * P * m.A);
    const Eigen::MatrixXd next = m.Q + m.A.transpose() * P * (m.A - m.B * K);
    if ((next - P).cwiseAbs().maxCoeff() < 1e-14) return next;
    P = 0.5 * (next + next.transpose());
  }
  return P;
}

TEST(Condense, SingleStepHessian) {
  MpcProblem m = MpcProblem::default_preset();
  m.N = 1;
  const CondensedQP qp = condense_qp(m);
  ASSERT_EQ(qp.H.rows(), 1);
  EXPECT_NEAR(qp.H(0, 0), 5.6852, 1e-12);
}

TEST(Condense, PresetShapes) {
  const CondensedQP qp = condense_qp(MpcProblem::default_preset());
  EXPECT_EQ(qp.H.rows(), 10);
  EXPECT_EQ(qp.G.rows(), 20);
  EXPECT_EQ(qp.G.cols(), 10);
  EXPECT_EQ(qp.c, Eigen::VectorXd::Ones(20));
  EXPECT_EQ(qp.G.topRows(10), 0.1 * Eigen::MatrixXd::Identity(10, 10));
  EXPECT_EQ(qp.G.bottomRows(10), -0.1 * Eigen::MatrixXd::Identity(10, 10));
  EXPECT_EQ(qp.S_v, Eigen::MatrixXd::Zero(20, 2));
}

TEST(Condense, CostMatchesRollout) {
  std::mt19937_64 rng(1);
  for (int N : {1, 3, 10}) {
    MpcProblem m = MpcProblem::default_preset();
    m.N = N;
    const CondensedQP qp = condense_qp(m);
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd w0 = testing::random_vector(rng, 2, 3.0);
      const Eigen::VectorXd V = testing::random_vector(rng, N, 5.0);
      const double J = rolled_out_cost(m, w0, V);
      EXPECT_LE(std::abs(qp.cost(w0, V) - J), 1e-9 * (1.0 + std::abs(J)));
    }
  }
}

TEST(Condense, RejectsIndefiniteWeights) {
  MpcProblem m = MpcProblem::default_preset();
  m.R(0, 0) = -1.0;
  EXPECT_ANY_THROW(condense_qp(m));
}

TEST(Oracle, ClipsToActiveBound) {
  CondensedQP qp;
  qp.H = Eigen::MatrixXd::Ones(1, 1);
  qp.F = Eigen::MatrixXd::Constant(1, 1, -20.0);
  qp.G = Eigen::Vector2d(0.1, -0.1);
  qp.c = Eigen::Vector2d(1.0, 1.0);
  qp.S_v = Eigen::MatrixXd::Zero(2, 1);
  qp.state_cost = Eigen::MatrixXd::Zero(1, 1);
  const QpSolution s = solve_qp_oracle(qp, Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(s.v(0), 10.0, 1e-8);
}

TEST(Oracle, KktResidualOnRandomStates) {
  const CondensedQP qp = condense_qp(MpcProblem::default_preset());
  std::mt19937_64 rng(2);
  EXPECT_LE(solve_qp_oracle(qp, Eigen::Vector2d::Zero()).v.lpNorm<Eigen::Infinity>(), 1e-12);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd w = testing::random_vector(rng, 2, k % 2 ? 2.0 : 20.0);
    const QpSolution s = solve_qp_oracle(qp, w);
    EXPECT_LE(qp_kkt_residual(qp, w, s.v, s.lambda), 1e-8);
  }
}

TEST(Bridge, NetworkMatchesOracleOnGrid) {
  const CondensedQP qp = condense_qp(MpcProblem::default_preset());
  const ImplicitNetwork net = qp_to_implicit_network(qp);
  EXPECT_EQ(net.dims(), (NetworkDims{20, 2, 10}));
  FixedPointConfig cfg;
  cfg.relu_direct = true;
  EXPECT_LE(evaluate(net, Eigen::Vector2d::Zero(), cfg).output.lpNorm<Eigen::Infinity>(), 1e-12);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector2d w(-5.0 + 10.0 * i / 9.0, -5.0 + 10.0 * k / 9.0);
      const Eigen::VectorXd d = evaluate(net, w, cfg).output - solve_qp_oracle(qp, w).v;
      worst = std::max(worst, d.lpNorm<Eigen::Infinity>());
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Bridge, WeightsFollowTheQp) {
  const CondensedQP qp = condense_qp(MpcProblem::default_preset());
  const ImplicitNetwork net = qp_to_implicit_network(qp);
  const Eigen::MatrixXd Hi = qp.H.inverse();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(20, 20);
  EXPECT_LE((net.state_weights - (I - qp.G * Hi * qp.G.transpose())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(net.activation.is_relu());
}

TEST(ClosedLoop, ZeroPolicyFollowsPlant) {
  const MpcProblem m = MpcProblem::default_preset();
  const NetworkPolicy zero{ImplicitNetwork::zeros({20, 2, 10}), {}};
  const Trajectory t = simulate_closed_loop(m, zero, Eigen::Vector2d(1.0, 0.0), 1);
  EXPECT_LE((t.w[1] - Eigen::Vector2d(4.0 / 3.0, 1.0)).norm(), 1e-15);
}

TEST(ClosedLoop, OracleStabilizesAndSaturates) {
  const MpcProblem m = MpcProblem::default_preset();
  const CondensedQP qp = condense_qp(m);
  const Trajectory t = simulate_closed_loop(m, QpPolicy{qp, {}}, Eigen::Vector2d(1.0, -1.0), 30);
  ASSERT_EQ(t.w.size(), 31u);
  ASSERT_EQ(t.v.size(), 30u);
  EXPECT_LT(t.w.back().norm(), 1e-3 * t.w.front().norm());
  FixedPointConfig cfg;
  cfg.relu_direct = true;
  const NetworkPolicy net{qp_to_implicit_network(qp), cfg};
  for (const Policy& p : {Policy(QpPolicy{qp, {}}), Policy(net)}) {
    const Trajectory big = simulate_closed_loop(m, p, Eigen::Vector2d(40.0, -40.0), 10);
    double vmax = 0.0;
    for (const auto& v : big.v) vmax = std::max(vmax, v.lpNorm<Eigen::Infinity>());
    EXPECT_LE(vmax, 10.0 + 1e-6);
    EXPECT_GE(vmax, 10.0 - 1e-6);  // the bound is active from this start
  }
}

TEST(ClosedLoop, RecedingHorizonMatchesOpenLoopWithRiccatiTerminal) {
  // With the Riccati solution as terminal weight and no active bound the
  // receding-horizon law equals the time-0 open-loop plan.
  MpcProblem m = MpcProblem::default_preset();
  m.P = dare(m);
  const CondensedQP qp = condense_qp(m);
  const Eigen::Vector2d w0(0.3, -0.2);
  const Eigen::VectorXd plan = solve_qp_oracle(qp, w0).v;
  ASSERT_LT(plan.lpNorm<Eigen::Infinity>(), 9.0);
  const Trajectory t = simulate_closed_loop(m, QpPolicy{qp, {}}, w0, m.N);
  Eigen::VectorXd w = w0;
  for (int k = 0; k < m.N; ++k) {
    EXPECT_NEAR(t.v[k](0), plan(k), 1e-6);
    w = m.A * w + m.B * plan.segment(k, 1);
    EXPECT_LE((t.w[k + 1] - w).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(ClosedLoop, DeviationAndCsv) {
  const MpcProblem m = MpcProblem::default_preset();
  const CondensedQP qp = condense_qp(m);
  const Trajectory a = simulate_closed_loop(m, QpPolicy{qp, {}}, Eigen::Vector2d(1.0, -1.0), 3);
  EXPECT_EQ(trajectory_deviation(a, a), 0.0);
  std::ostringstream os;
  write_trajectory_csv(os, a, false);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,w1,w2,v");
  int rows = 0;
  std::string last;
  while (std::getline(is, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(last.back(), ',');  // no input after the final state
}

}  // namespace
}  // namespace robustify
