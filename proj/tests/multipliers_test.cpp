#include <random>

#include <gtest/gtest.h>

#include "robustify/activation.hpp"
#include "robustify/errors.hpp"
#include "robustify/multipliers.hpp"
#include "robustify/verification.hpp"
#include "support.hpp"

namespace robustify {
namespace {

using testing::random_matrix;
using testing::random_network;
using testing::random_positive;
using testing::random_vector;

struct Instance {
  Dims d;
  Eigen::VectorXd T_z, T_g;
  Eigen::MatrixXd Psi_z, Psi_u, Psi_gz, Psi_gu;
  Eigen::VectorXd z, u, g;  // increments
  IncrementalVector p;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 5);
  Instance in;
  in.d = Dims(size(rng), size(rng), size(rng));
  const Dims& d = in.d;
  in.T_z = random_positive(rng, d.n);
  in.T_g = random_positive(rng, d.n_g);
  in.Psi_z = random_matrix(rng, d.n, d.n);
  in.Psi_u = random_matrix(rng, d.n, d.n_u);
  in.Psi_gz = random_matrix(rng, d.n_g, d.n);
  in.Psi_gu = random_matrix(rng, d.n_g, d.n_u);
  in.z = random_vector(rng, d.n);
  in.u = random_vector(rng, d.n_u);
  in.g = in.Psi_gz * in.z + in.Psi_gu * in.u;
  in.p = make_incremental(d, in.g, in.u, in.z);
  return in;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

TEST(Dims, LayoutTotals) {
  EXPECT_EQ(Dims(1, 1, 1).N_p(), 7);
  EXPECT_EQ(Dims(20, 2, 10).N_p(), 47);
  const Dims d(3, 2, 4);
  EXPECT_EQ(d.g_minus(), 4);
  EXPECT_EQ(d.u_plus(), 8);
  EXPECT_EQ(d.u_minus(), 10);
  EXPECT_EQ(d.z(), 12);
  EXPECT_EQ(d.u(), 15);
  EXPECT_EQ(d.one(), 17);
  EXPECT_EQ(d.N_p(), 18);
}

TEST(Incremental, IdenticalInputsGiveUnitVector) {
  std::mt19937_64 rng(1);
  const ImplicitNetwork net = random_network(rng, 3, 2, 2);
  const Eigen::VectorXd u = random_vector(rng, 2);
  const IncrementalVector p = assemble_p(net, u, u);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(Dims(net.dims()).N_p());
  expect(expect.size() - 1) = 1.0;
  EXPECT_EQ(p.flat, expect);
}

TEST(Incremental, ZeroNetworkOnlyCarriesInputIncrement) {
  const ImplicitNetwork net = ImplicitNetwork::zeros({3, 2, 2});
  const Eigen::Vector2d u1(1.0, 2.0), u2(-0.5, 4.0);
  const IncrementalVector p = assemble_p(net, u1, u2);
  EXPECT_EQ(p.g_pm, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(p.z_tilde, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(p.u_tilde, u2 - u1);
}

TEST(Incremental, OneNormsFromSplit) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const ImplicitNetwork net = random_network(rng, 1 + k % 5, 2, 3);
    const Eigen::VectorXd u1 = random_vector(rng, 2), u2 = random_vector(rng, 2);
    const IncrementalVector p = assemble_p(net, u1, u2);
    const Eigen::VectorXd g =
        net.output_state_weights * p.z_tilde + net.output_input_weights * p.u_tilde;
    EXPECT_NEAR(p.g_pm.sum(), g.lpNorm<1>(), 1e-12 * (1.0 + g.lpNorm<1>()));
    EXPECT_NEAR(p.u_pm.sum(), (u2 - u1).lpNorm<1>(), 1e-14);
    EXPECT_GE(p.g_pm.minCoeff(), 0.0);
    EXPECT_GE(p.u_pm.minCoeff(), 0.0);
  }
}

TEST(OmegaZ, HandExample) {
  const Dims d(1, 1, 1);
  const auto f = build_omega_z(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 0.5),
                               Eigen::MatrixXd::Constant(1, 1, 2.0), d);
  EXPECT_EQ(f.M(d.z(), d.z()), -1.0);
  // B above the diagonal and B' below, so p'Mp counts the cross term twice.
  EXPECT_EQ(f.M(d.z(), d.u()), 2.0);
  EXPECT_EQ(f.M(d.u(), d.z()), 2.0);
  EXPECT_EQ(f.M.cwiseAbs().sum(), 5.0);
}

TEST(OmegaZ, ScalarExpansion) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Instance in = random_instance(rng);
    const auto f = build_omega_z(in.T_z, in.Psi_z, in.Psi_u, in.d);
    const double oracle =
        2.0 * in.z.dot(in.T_z.asDiagonal() * (in.Psi_z * in.z + in.Psi_u * in.u - in.z));
    EXPECT_LE(rel_err(f.value(in.p.flat), oracle), 1e-12);
  }
}

TEST(OmegaU, CornerAndExpansion) {
  const Dims d(2, 3, 1);
  const auto f = build_omega_u(2.0, 4.0, {0.5, 0.25}, d);
  EXPECT_EQ(f.M(d.one(), d.one()), 2.0);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const double t1 = std::abs(random_vector(rng, 1)(0)), t2 = std::abs(random_vector(rng, 1)(0));
    const InputPairSet U{1.3, 0.7};
    const Eigen::VectorXd u = random_vector(rng, d.n_u);
    const IncrementalVector p = make_incremental(d, random_vector(rng, d.n_g), u, random_vector(rng, d.n));
    const double oracle = t1 * U.eps_u1 + t2 * U.eps_u2 - t2 * u.squaredNorm() - t1 * u.lpNorm<1>();
    EXPECT_LE(rel_err(build_omega_u(t1, t2, U, d).value(p.flat), oracle), 1e-12);
  }
}

TEST(OmegaU, TightAtOneNormBoundary) {
  const Dims d(1, 3, 1);
  const InputPairSet U{1.0, 100.0};
  const Eigen::Vector3d u = Eigen::Vector3d(0.2, -0.5, 0.3);  // ||u||_1 = 1
  const IncrementalVector p = make_incremental(d, Eigen::VectorXd::Zero(1), u, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(build_omega_u(1.0, 0.0, U, d).value(p.flat), 0.0, 1e-12);
}

TEST(OmegaG, ReluSlopeExpansion) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const Instance in = random_instance(rng);
    const auto f = build_omega_g(in.T_g, in.Psi_gz, in.Psi_gu, in.d);
    const Eigen::VectorXd a = relu(in.g), b = relu(-in.g);
    const Eigen::VectorXd Tg = in.T_g;
    const double lemma = 2.0 * (a - b).dot(Tg.asDiagonal() * in.g) -
                         a.dot(Tg.asDiagonal() * a) - b.dot(Tg.asDiagonal() * b);
    EXPECT_LE(rel_err(f.value(in.p.flat), lemma), 1e-12);
    // On realizable p the slope terms leave g'T g, which is nonnegative.
    EXPECT_LE(rel_err(f.value(in.p.flat), in.g.dot(Tg.asDiagonal() * in.g)), 1e-12);
  }
}

TEST(OmegaGamma, Expansion) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const Instance in = random_instance(rng);
    const double g0 = 1.5, g1 = 0.7, g2 = 0.2;
    const auto f = build_omega_gamma(g0, g1, g2, in.d);
    const double oracle = in.g.lpNorm<1>() - g0 - g1 * in.u.lpNorm<1>() - g2 * in.u.squaredNorm();
    EXPECT_LE(rel_err(f.value(in.p.flat), oracle), 1e-12);
  }
  const Dims d(2, 2, 2);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d.N_p());
  e(d.one()) = 1.0;
  EXPECT_EQ(build_omega_gamma(3.0, 0.0, 0.0, d).value(e), -3.0);
}

TEST(Forms, ZeroMultipliersGiveZeroMatrices) {
  const Dims d(3, 2, 2);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d.N_p(), d.N_p());
  std::mt19937_64 rng(7);
  EXPECT_EQ(build_omega_z(Eigen::VectorXd::Zero(3), random_matrix(rng, 3, 3), random_matrix(rng, 3, 2), d).M, Z);
  EXPECT_EQ(build_omega_g(Eigen::VectorXd::Zero(2), random_matrix(rng, 2, 3), random_matrix(rng, 2, 2), d).M, Z);
  EXPECT_EQ(build_omega_u(0.0, 0.0, {1.0, 1.0}, d).M, Z);
  EXPECT_EQ(build_omega_z_check(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 2), d).M, Z);
  // Only the output-to-constant coupling survives with all gains zero.
  const Eigen::MatrixXd G = build_omega_gamma(0.0, 0.0, 0.0, d).M;
  EXPECT_EQ(G.block(0, d.one(), 2 * d.n_g, 1).cwiseAbs().minCoeff(), 0.5);
  EXPECT_EQ(G.cwiseAbs().sum(), 2.0 * 0.5 * 2 * d.n_g);
}

TEST(Forms, SymmetricExactly) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const Instance in = random_instance(rng);
    for (const auto& f :
         {build_omega_z(in.T_z, in.Psi_z, in.Psi_u, in.d),
          build_omega_g(in.T_g, in.Psi_gz, in.Psi_gu, in.d),
          build_omega_u(0.3, 0.9, {1.0, 2.0}, in.d), build_omega_gamma(1.0, 2.0, 3.0, in.d),
          build_omega_z_check(in.T_z, random_matrix(rng, in.d.n, in.d.n), random_matrix(rng, in.d.n, in.d.n_u), in.d)}) {
      EXPECT_EQ(f.M, f.M.transpose()) << to_string(f.tag);
    }
  }
}

TEST(Forms, SubstitutionIdentityIsBitExact) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 200; ++k) {
    const Instance in = random_instance(rng);
    const Eigen::MatrixXd Tz = in.T_z.asDiagonal(), Tg = in.T_g.asDiagonal();
    EXPECT_EQ(build_omega_z_check(in.T_z, Tz * in.Psi_z, Tz * in.Psi_u, in.d).M,
              build_omega_z(in.T_z, in.Psi_z, in.Psi_u, in.d).M);
    EXPECT_EQ(build_omega_g_check(in.T_g, Tg * in.Psi_gz, Tg * in.Psi_gu, in.d).M,
              build_omega_g(in.T_g, in.Psi_gz, in.Psi_gu, in.d).M);
  }
}

TEST(Forms, CheckedFormsAreAffine) {
  std::mt19937_64 rng(10);
  const Dims d(4, 2, 3);
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd T1 = random_positive(rng, 4), T2 = random_positive(rng, 4);
    const Eigen::MatrixXd Y1 = random_matrix(rng, 4, 4), Y2 = random_matrix(rng, 4, 4);
    const Eigen::MatrixXd V1 = random_matrix(rng, 4, 2), V2 = random_matrix(rng, 4, 2);
    const Eigen::MatrixXd sum = build_omega_z_check(T1 + T2, Y1 + Y2, V1 + V2, d).M;
    const Eigen::MatrixXd parts = build_omega_z_check(T1, Y1, V1, d).M + build_omega_z_check(T2, Y2, V2, d).M;
    EXPECT_LE((sum - parts).cwiseAbs().maxCoeff(), 1e-13);

    const Eigen::VectorXd G1 = random_positive(rng, 3), G2 = random_positive(rng, 3);
    const Eigen::MatrixXd A1 = random_matrix(rng, 3, 4), A2 = random_matrix(rng, 3, 4);
    const Eigen::MatrixXd B1 = random_matrix(rng, 3, 2), B2 = random_matrix(rng, 3, 2);
    const Eigen::MatrixXd gsum = build_omega_g_check(G1 + G2, A1 + A2, B1 + B2, d).M;
    const Eigen::MatrixXd gparts = build_omega_g_check(G1, A1, B1, d).M + build_omega_g_check(G2, A2, B2, d).M;
    EXPECT_LE((gsum - gparts).cwiseAbs().maxCoeff(), 1e-13);

    const Eigen::MatrixXd usum = build_omega_u(0.3 + 0.4, 1.1 + 0.2, {1.0, 2.0}, d).M +
                                 build_omega_gamma(1.0 + 2.0, 0.5 + 0.25, 0.0, d).M;
    const Eigen::MatrixXd uparts = build_omega_u(0.3, 1.1, {1.0, 2.0}, d).M + build_omega_u(0.4, 0.2, {1.0, 2.0}, d).M +
                                   build_omega_gamma(1.0, 0.5, 0.0, d).M + build_omega_gamma(2.0, 0.25, 0.0, d).M -
                                   build_omega_gamma(0.0, 0.0, 0.0, d).M;
    EXPECT_LE((usum - uparts).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Forms, DimensionMismatchThrows) {
  const Dims d(3, 2, 2);
  EXPECT_THROW(build_omega_z(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 2), d),
               DimensionMismatch);
  EXPECT_THROW(build_omega_g_check(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), d),
               DimensionMismatch);
}

TEST(Lemmas, SampledFormsAreNonnegative) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 30; ++k) {
    const int n = 1 + k % 8;
    const ImplicitNetwork net = random_network(rng, n, 2, 3);
    MultiplierSet m{random_positive(rng, n, 0.0, 3.0), random_positive(rng, 3, 0.0, 3.0), 0.7, 1.3};
    SampleSpec spec;
    spec.pairset = {1.5, 0.8};
    spec.count = 200;
    spec.seed = k;
    spec.center = Eigen::VectorXd::Zero(2);
    const LemmaReport r = lemma_property_suite(net, m, spec);
    EXPECT_TRUE(r.passes()) << r.min_scaled_s_z << " " << r.min_scaled_s_u << " " << r.min_scaled_s_g;
  }
}

TEST(Lemmas, ZeroMultipliersGiveZeroForms) {
  std::mt19937_64 rng(12);
  const ImplicitNetwork net = random_network(rng, 3, 2, 2);
  MultiplierSet m{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2), 0.0, 0.0};
  SampleSpec spec;
  spec.pairset = {1.0, 1.0};
  spec.count = 50;
  spec.center = Eigen::VectorXd::Zero(2);
  const LemmaReport r = lemma_property_suite(net, m, spec);
  EXPECT_EQ(r.min_s_z, 0.0);
  EXPECT_EQ(r.min_s_u, 0.0);
  EXPECT_EQ(r.min_s_g, 0.0);
}

}  // namespace
}  // namespace robustify
