#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "robustify/errors.hpp"
#include "robustify/verification.hpp"
#include "support.hpp"

namespace robustify {
namespace {

SampleSpec spec_for(int n_u, InputPairSet set, int count, std::uint64_t seed = 0) {
  SampleSpec s;
  s.pairset = set;
  s.count = count;
  s.seed = seed;
  s.center = Eigen::VectorXd::Zero(n_u);
  return s;
}

TEST(Sampler, DeterministicForFixedSeed) {
  const auto a = sample_input_pairs(spec_for(3, {0.5, 0.2}, 200, 7));
  const auto b = sample_input_pairs(spec_for(3, {0.5, 0.2}, 200, 7));
  const auto c = sample_input_pairs(spec_for(3, {0.5, 0.2}, 200, 8));
  ASSERT_EQ(a.size(), 200u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].first, b[k].first);
    EXPECT_EQ(a[k].second, b[k].second);
  }
  EXPECT_NE(a[0].first, c[0].first);
}

TEST(Sampler, PairsLieInTheSetAndTheBox) {
  for (const InputPairSet set : {InputPairSet{1.0, 1.0}, InputPairSet{0.1, 10.0},
                                 InputPairSet{3.0, 0.01}}) {
    const SampleSpec s = spec_for(4, set, 1000, 3);
    for (const auto& [u1, u2] : sample_input_pairs(s)) {
      EXPECT_TRUE(set.contains(u1, u2));
      EXPECT_LE(u1.lpNorm<Eigen::Infinity>(), s.radius);
    }
  }
}

TEST(Sampler, ZeroSetGivesIdenticalInputs) {
  for (const auto& [u1, u2] : sample_input_pairs(spec_for(2, {0.0, 0.0}, 100))) {
    EXPECT_EQ(u1, u2);
  }
}

TEST(Sampler, ConcentratesNearTheBindingConstraint) {
  // eps_u1 = 1 binds for a scalar input, as 1 < sqrt(100).
  const auto pairs = sample_input_pairs(spec_for(1, {1.0, 100.0}, 1000, 5));
  double largest = 0.0;
  int near = 0;
  for (const auto& [u1, u2] : pairs) {
    const double d = (u1 - u2).lpNorm<1>();
    largest = std::max(largest, d);
    if (d >= 0.95 - 1e-12) ++near;
  }
  EXPECT_GE(largest, 0.94);
  EXPECT_GE(near, 500);
}

TEST(Sampler, InvalidSpecThrows) {
  SampleSpec s = spec_for(2, {1.0, 1.0}, 0);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = spec_for(2, {-1.0, 1.0}, 10);
  EXPECT_ANY_THROW(sample_input_pairs(s));
}

TEST(BoundCheck, ZeroNetworkNeverViolates) {
  const ImplicitNetwork net = ImplicitNetwork::zeros({3, 2, 2});
  const BoundCheckReport r =
      empirical_bound_check(net, RobustnessCertificate{}, spec_for(2, {1.0, 1.0}, 500));
  EXPECT_EQ(r.samples, 500);
  EXPECT_EQ(r.violations, 0);
  EXPECT_EQ(r.max_lhs, 0.0);
  EXPECT_EQ(r.empirical_gamma_lb, 0.0);
}

TEST(BoundCheck, IdentityMapIsTightForUnitGain) {
  ImplicitNetwork net = ImplicitNetwork::zeros({0, 2, 2});
  net.output_input_weights = Eigen::MatrixXd::Identity(2, 2);
  const RobustnessCertificate cert{0.0, 1.0, 0.0};
  const BoundCheckReport r = empirical_bound_check(net, cert, spec_for(2, {1.0, 1.0}, 500));
  EXPECT_EQ(r.violations, 0);
  EXPECT_LE(std::abs(r.worst_margin), 1e-12);
  EXPECT_LE(r.max_lhs, 1.0 + 1e-12);
}

TEST(BoundCheck, FalseCertificateYieldsCounterexamples) {
  std::mt19937_64 rng(2);
  const ImplicitNetwork net = testing::random_network(rng, 3, 2, 2);
  CheckOptions opts;
  opts.max_counterexamples = 4;
  const BoundCheckReport r =
      empirical_bound_check(net, RobustnessCertificate{}, spec_for(2, {1.0, 1.0}, 300), opts);
  EXPECT_GT(r.violations, 0);
  ASSERT_EQ(r.counterexamples.size(), 4u);
  for (const auto& c : r.counterexamples) EXPECT_GT(c.lhs - c.rhs, opts.tolerance);
  EXPECT_GT(r.worst_margin, 0.0);

  const auto path = std::filesystem::temp_directory_path() / "robustify_cex_test.json";
  write_counterexamples_json(path.string(), net, RobustnessCertificate{}, r);
  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  std::filesystem::remove(path);
  EXPECT_TRUE(j.contains("counterexamples"));
  EXPECT_EQ(j["counterexamples"].size(), 4u);
}

TEST(BoundCheck, ParallelMatchesSerial) {
  std::mt19937_64 rng(3);
  const ImplicitNetwork net = testing::random_network(rng, 4, 2, 3);
  const RobustnessCertificate cert{0.5, 1.0, 0.1};
  const SampleSpec s = spec_for(2, {1.0, 1.0}, 400, 9);
  CheckOptions par;
  par.jobs = 4;
  const BoundCheckReport a = empirical_bound_check(net, cert, s);
  const BoundCheckReport b = empirical_bound_check(net, cert, s, par);
  EXPECT_EQ(a.violations, b.violations);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
  EXPECT_EQ(a.max_lhs, b.max_lhs);
}

SynthesisProblem sweep_base() {
  std::mt19937_64 rng(4);
  SynthesisProblem p;
  p.original = testing::random_network(rng, 3, 2, 2, 0.6);
  p.pairset = {1.0, 1.0};
  p.weights = {1.0, 0.0, 0.0};
  return p;
}

TEST(Sweep, ZeroToleranceRowEqualsAnalysis) {
  const SynthesisProblem base = sweep_base();
  const SweepResult r = sweep_tolerance(base, {0.0, 0.05, 0.5});
  ASSERT_EQ(r.rows.size(), 3u);
  AnalysisOptions ao;
  ao.fixed_gamma_u1 = 0.0;
  ao.fixed_gamma_u2 = 0.0;
  auto backend = make_backend("ipm");
  const AnalysisResult a = analyze_network(base.original, base.pairset, base.weights, *backend, ao);
  ASSERT_EQ(a.status, SolveStatus::kOptimal);
  ASSERT_EQ(r.rows[0].status, SolveStatus::kOptimal);
  EXPECT_NEAR(r.rows[0].gamma, a.certificate.gamma, 1e-6 * (1.0 + a.certificate.gamma));
  EXPECT_LE(r.rows[0].max_weight_deviation, 1e-9);
  for (const SweepRow& row : r.rows) {
    ASSERT_EQ(row.status, SolveStatus::kOptimal) << row.message;
    EXPECT_LE(std::abs(row.gamma_u1), 1e-12);
    EXPECT_LE(std::abs(row.gamma_u2), 1e-12);
    EXPECT_LE(row.max_weight_deviation, row.eps * (1.0 + 1e-6) + 1e-9);
  }
  EXPECT_LE(r.rows[1].gamma, r.rows[0].gamma * (1.0 + 1e-6) + 1e-6);
  EXPECT_LE(r.rows[2].gamma, r.rows[1].gamma * (1.0 + 1e-6) + 1e-6);
}

TEST(Sweep, SampledRowsRespectTheirCertificates) {
  SweepOptions opts;
  opts.samples = spec_for(2, {1.0, 1.0}, 300, 1);
  const SweepResult r = sweep_tolerance(sweep_base(), {0.1}, opts);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.rows[0].empirical_max_lhs));
  EXPECT_LE(r.rows[0].empirical_max_lhs, r.rows[0].gamma + 1e-6);
}

TEST(Sweep, RejectsBadTolerancesLists) {
  EXPECT_THROW(sweep_tolerance(sweep_base(), {}), std::invalid_argument);
  EXPECT_THROW(sweep_tolerance(sweep_base(), {0.1, 0.01}), std::invalid_argument);
}

TEST(Sweep, CsvAndPlotFormats) {
  const SweepResult r = sweep_tolerance(sweep_base(), {0.0, 0.1});
  std::ostringstream csv;
  write_sweep_csv(csv, r, false);
  std::istringstream is(csv.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line,
            "eps,gamma,gamma_u1,gamma_u2,objective,status,empirical_max_lhs,max_weight_deviation");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
  }
  EXPECT_EQ(rows, 2);
  std::ostringstream again;
  write_sweep_csv(again, r, false);
  EXPECT_EQ(csv.str(), again.str());

  std::ostringstream plot;
  write_sweep_plot_data(plot, r);
  std::istringstream ps(plot.str());
  std::getline(ps, line);
  EXPECT_EQ(line.rfind('#', 0), 0u);
  double eps = -1.0, gamma = -1.0;
  ps >> eps >> gamma;
  EXPECT_EQ(eps, 0.0);
  EXPECT_NEAR(gamma, r.rows[0].gamma, 1e-12 * (1.0 + gamma));
}

}  // namespace
}  // namespace robustify
