#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "robustify/activation.hpp"
#include "robustify/errors.hpp"
#include "robustify/lcp.hpp"
#include "robustify/network.hpp"
#include "robustify/network_io.hpp"
#include "robustify/well_posedness.hpp"
#include "support.hpp"

namespace robustify {
namespace {

using testing::random_matrix;
using testing::random_network;
using testing::random_vector;

TEST(Activation, SecantSlopesStayInUnitInterval) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  const Activation kinds[] = {
      Activation::relu(), Activation::tanh(), Activation::sigmoid_shifted(),
      Activation::custom_sampled({-1.0, 0.0, 2.0}, {-0.5, 0.0, 0.4})};
  for (const auto& act : kinds) {
    for (int k = 0; k < 2000; ++k) {
      const double a = u(rng), b = u(rng);
      if (a == b) continue;
      const double slope = (act(a) - act(b)) / (a - b);
      EXPECT_GE(slope, -1e-12) << act.name();
      EXPECT_LE(slope, 1.0 + 1e-12) << act.name();
    }
  }
}

TEST(Activation, ShiftedSigmoidPassesThroughOrigin) {
  const Activation s = Activation::sigmoid_shifted();
  EXPECT_DOUBLE_EQ(s(0.0), 0.0);
  EXPECT_NEAR(s(1.0), 1.0 / (1.0 + std::exp(-1.0)) - 0.5, 1e-15);
}

TEST(Activation, CustomKnotsAreValidated) {
  EXPECT_THROW(Activation::custom_sampled({0.0, 1.0}, {0.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Activation::custom_sampled({1.0, 0.0}, {0.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(Activation::custom_sampled({0.0}, {0.0}), std::invalid_argument);
  const Activation c = Activation::custom_sampled({0.0, 1.0}, {0.0, 0.5});
  EXPECT_DOUBLE_EQ(c(3.0), 1.5);  // linear extension of the last segment
}

TEST(Activation, NamesRoundTrip) {
  for (const char* n : {"relu", "tanh", "sigmoid_shifted"}) {
    EXPECT_EQ(Activation::from_name(n).name(), n);
  }
  EXPECT_THROW(Activation::from_name("softplus"), std::invalid_argument);
}

TEST(Activation, AbsViaReluMatchesAbs) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::VectorXd v = random_vector(rng, 1 + k % 7, 3.0);
    EXPECT_EQ(abs_via_relu(v), v.cwiseAbs());
  }
}

TEST(Evaluate, ScalarReluClosedForm) {
  // x = relu(0.5 x + u): x = 2u for u > 0, else 0. Output f = 3x + u.
  ImplicitNetwork net = ImplicitNetwork::zeros({1, 1, 1});
  net.state_weights(0, 0) = 0.5;
  net.input_weights(0, 0) = 1.0;
  net.output_state_weights(0, 0) = 3.0;
  net.output_input_weights(0, 0) = 1.0;
  for (double u : {-2.0, -0.1, 0.0, 0.3, 1.7}) {
    const Evaluation e = evaluate(net, Eigen::VectorXd::Constant(1, u));
    const double x = u > 0 ? 2.0 * u : 0.0;
    EXPECT_NEAR(e.state(0), x, 1e-9);
    EXPECT_NEAR(e.output(0), 3.0 * x + u, 1e-9);
  }
}

TEST(Evaluate, RoutesAgreeOnRandomReluNetworks) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const ImplicitNetwork net = random_network(rng, 1 + k % 8, 2, 3);
    const Eigen::VectorXd u = random_vector(rng, 2);
    FixedPointConfig picard;
    picard.relu_fallback = false;
    FixedPointConfig anderson = picard;
    anderson.anderson_depth = 5;
    FixedPointConfig direct;
    direct.relu_direct = true;
    const Eigen::VectorXd a = evaluate(net, u, picard).output;
    EXPECT_LE((evaluate(net, u, anderson).output - a).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE((evaluate(net, u, direct).output - a).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Evaluate, SmoothActivationsReachTolerance) {
  std::mt19937_64 rng(4);
  for (const Activation& act : {Activation::tanh(), Activation::sigmoid_shifted()}) {
    const ImplicitNetwork net = random_network(rng, 6, 2, 2, 0.9, act);
    const Eigen::VectorXd u = random_vector(rng, 2);
    const Evaluation e = evaluate(net, u);
    EXPECT_LE(equilibrium_residual(net, u, e.state), 1e-10);
  }
}

TEST(Evaluate, MissingEquilibriumThrows) {
  // x = relu(2 x + 1) has no fixed point.
  ImplicitNetwork net = ImplicitNetwork::zeros({1, 1, 1});
  net.state_weights(0, 0) = 2.0;
  net.state_bias(0) = 1.0;
  FixedPointConfig cfg;
  cfg.max_iters = 200;
  EXPECT_THROW(evaluate(net, Eigen::VectorXd::Zero(1), cfg), NonConvergence);
}

TEST(Evaluate, WrongInputSizeThrows) {
  const ImplicitNetwork net = ImplicitNetwork::zeros({2, 3, 1});
  EXPECT_THROW(evaluate(net, Eigen::VectorXd::Zero(2)), DimensionMismatch);
}

TEST(Network, ZeroNetworkOutputsZero) {
  const ImplicitNetwork net = ImplicitNetwork::zeros({4, 2, 3});
  EXPECT_EQ(evaluate(net, Eigen::Vector2d(1.0, -5.0)).output, Eigen::VectorXd::Zero(3));
}

TEST(Network, ValidateRejectsBadShapes) {
  ImplicitNetwork net = ImplicitNetwork::zeros({3, 2, 1});
  net.input_weights = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(net.validate(), DimensionMismatch);
  net = ImplicitNetwork::zeros({3, 2, 1});
  net.state_bias(1) = std::nan("");
  EXPECT_THROW(net.validate(), std::invalid_argument);
}

TEST(NetworkIo, JsonRoundTripIsExact) {
  std::mt19937_64 rng(5);
  for (const Activation& act :
       {Activation::relu(), Activation::tanh(),
        Activation::custom_sampled({-1.0, 0.5, 3.0}, {-0.25, 0.0, 1.0})}) {
    const ImplicitNetwork net = random_network(rng, 4, 3, 2, 0.7, act);
    const ImplicitNetwork back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
    EXPECT_TRUE(back == net);
  }
}

TEST(NetworkIo, UnknownFieldIsRejected) {
  nlohmann::json j = network_to_json(ImplicitNetwork::zeros({1, 1, 1}));
  j["extra"] = 1;
  EXPECT_THROW(network_from_json(j), SchemaError);
}

TEST(NetworkIo, DeclaredDimsMustMatch) {
  nlohmann::json j = network_to_json(ImplicitNetwork::zeros({2, 1, 1}));
  j["n"] = 3;
  EXPECT_ANY_THROW(network_from_json(j));
}

// Exhaustive search over complementary supports as an LCP oracle.
bool brute_force_lcp(const Eigen::MatrixXd& M, const Eigen::VectorXd& q, Eigen::VectorXd* z) {
  const int n = static_cast<int>(q.size());
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) s.push_back(i);
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(n);
    if (!s.empty()) {
      Eigen::MatrixXd Ms(s.size(), s.size());
      Eigen::VectorXd qs(s.size());
      for (std::size_t a = 0; a < s.size(); ++a) {
        qs(a) = q(s[a]);
        for (std::size_t b = 0; b < s.size(); ++b) Ms(a, b) = M(s[a], s[b]);
      }
      const Eigen::VectorXd zs = Ms.fullPivLu().solve(-qs);
      for (std::size_t a = 0; a < s.size(); ++a) cand(s[a]) = zs(a);
    }
    const Eigen::VectorXd w = M * cand + q;
    if (cand.minCoeff() >= -1e-10 && w.minCoeff() >= -1e-10) {
      *z = cand;
      return true;
    }
  }
  return false;
}

TEST(Lcp, MatchesExhaustiveSearchOnPMatrices) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 6;
    const Eigen::MatrixXd A = random_matrix(rng, n, n);
    const Eigen::MatrixXd M = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd q = random_vector(rng, n);
    const LcpSolution sol = solve_lcp(M, q);
    ASSERT_TRUE(sol.solved);
    Eigen::VectorXd z;
    ASSERT_TRUE(brute_force_lcp(M, q, &z));
    EXPECT_LE((sol.z - z).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_GE(sol.z.minCoeff(), 0.0);
    EXPECT_GE(sol.w.minCoeff(), -1e-12);
    EXPECT_LE(std::abs(sol.z.dot(sol.w)), 1e-10);
  }
}

TEST(Lcp, NonnegativeDataGivesZero) {
  const LcpSolution s = solve_lcp(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 0, 2));
  ASSERT_TRUE(s.solved);
  EXPECT_EQ(s.z, Eigen::VectorXd::Zero(3));
}

TEST(WellPosedness, CertifiesContractionsAndRejectsExpansion) {
  auto backend = make_backend("ipm");
  EXPECT_TRUE(well_posedness_certificate(0.5 * Eigen::MatrixXd::Identity(3, 3), *backend).certified);
  Eigen::Matrix2d nil;
  nil << 0.0, 2.0, 0.0, 0.0;  // He(T(I - W)) > 0 needs t2 > t1
  const WellPosednessResult r = well_posedness_certificate(nil, *backend);
  EXPECT_TRUE(r.certified);
  EXPECT_GT(r.T(1), r.T(0));
  EXPECT_FALSE(well_posedness_certificate(2.0 * Eigen::MatrixXd::Identity(2, 2), *backend).certified);
}

}  // namespace
}  // namespace robustify
