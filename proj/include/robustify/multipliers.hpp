#pragma once

#include <string>

#include <Eigen/Dense>

#include "robustify/network.hpp"

namespace robustify {

/// Layout of the incremental vector p = [g+; g-; u+; u-; z; u; 1].
///
/// g+/g- are relu(+-g_tilde) (n_g each), u+/u- are relu(+-u_tilde) (n_u
/// each), z is the state increment (n), u the input increment (n_u) and the
/// final entry is the constant one. Every quadratic form below is indexed
/// through these offsets.
struct Dims {
  int n = 0;
  int n_u = 0;
  int n_g = 0;

  Dims() = default;
  Dims(int n_, int n_u_, int n_g_) : n(n_), n_u(n_u_), n_g(n_g_) {}
  explicit Dims(const NetworkDims& d) : n(d.n), n_u(d.n_u), n_g(d.n_g) {}

  int N_p() const { return 2 * n_g + 2 * n_u + n + n_u + 1; }
  int g_plus() const { return 0; }
  int g_minus() const { return n_g; }
  int u_plus() const { return 2 * n_g; }
  int u_minus() const { return 2 * n_g + n_u; }
  int z() const { return 2 * n_g + 2 * n_u; }
  int u() const { return 2 * n_g + 2 * n_u + n; }
  int one() const { return 2 * n_g + 2 * n_u + n + n_u; }

  bool operator==(const Dims&) const = default;
};

struct IncrementalVector {
  Eigen::VectorXd g_pm;     // [relu(g~); relu(-g~)]
  Eigen::VectorXd u_pm;     // [relu(u~); relu(-u~)]
  Eigen::VectorXd z_tilde;  // z2 - z1
  Eigen::VectorXd u_tilde;  // u2 - u1
  double one = 1.0;
  Eigen::VectorXd flat;     // N_p entries in Dims order
};

/// Builds p from increments; g_tilde is the output-channel increment
/// Psi_gz z~ + Psi_gu u~ (the output bias cancels).
IncrementalVector make_incremental(const Dims& dims,
                                   const Eigen::VectorXd& g_tilde,
                                   const Eigen::VectorXd& u_tilde,
                                   const Eigen::VectorXd& z_tilde);

/// Evaluates `net` at both inputs and builds p(u1, u2). Propagates
/// NonConvergence.
IncrementalVector assemble_p(const ImplicitNetwork& net,
                             const Eigen::VectorXd& u1,
                             const Eigen::VectorXd& u2,
                             const FixedPointConfig& cfg = {});

/// Diagonal multipliers for the state, output and input constraints.
struct MultiplierSet {
  Eigen::VectorXd T_z;  // diagonal, n
  Eigen::VectorXd T_g;  // diagonal, n_g
  double T_u1 = 0.0;
  double T_u2 = 0.0;
};

/// Pairs with ||u1 - u2||_1 <= eps_u1 and ||u1 - u2||_2^2 <= eps_u2.
struct InputPairSet {
  double eps_u1 = 0.0;
  double eps_u2 = 0.0;

  void validate() const;
  bool contains(const Eigen::VectorXd& u1, const Eigen::VectorXd& u2) const;
};

/// ||g(u1) - g(u2)||_1 <= gamma + gamma_u1 ||du||_1 + gamma_u2 ||du||_2^2.
struct RobustnessCertificate {
  double gamma = 0.0;
  double gamma_u1 = 0.0;
  double gamma_u2 = 0.0;

  double bound(const Eigen::VectorXd& du) const {
    return gamma + gamma_u1 * du.lpNorm<1>() + gamma_u2 * du.squaredNorm();
  }
};

enum class FormTag {
  kOmegaZ,
  kOmegaU,
  kOmegaG,
  kOmegaCheckZ,
  kOmegaCheckG,
  kOmegaGamma
};

std::string to_string(FormTag tag);

/// Symmetric N_p x N_p matrix of one quadratic constraint.
///
/// Off-diagonal blocks are stored as B above and B' below the diagonal, and
/// He(X) blocks as X + X', so p'Mp is the form exactly as written.
struct QuadraticFormMatrix {
  FormTag tag = FormTag::kOmegaZ;
  Eigen::MatrixXd M;

  double value(const Eigen::VectorXd& p) const { return p.dot(M * p); }
};

/// State slope restriction: He(T_z Psi_z - T_z) and T_z Psi_u blocks.
QuadraticFormMatrix build_omega_z(const Eigen::VectorXd& T_z,
                                  const Eigen::MatrixXd& Psi_z,
                                  const Eigen::MatrixXd& Psi_u,
                                  const Dims& dims);

/// Input-pair set constraint (1-norm via relu split, and squared 2-norm).
QuadraticFormMatrix build_omega_u(double T_u1, double T_u2,
                                  const InputPairSet& pairset,
                                  const Dims& dims);

/// Output-channel relu slope restriction.
QuadraticFormMatrix build_omega_g(const Eigen::VectorXd& T_g,
                                  const Eigen::MatrixXd& Psi_gz,
                                  const Eigen::MatrixXd& Psi_gu,
                                  const Dims& dims);

/// Same structure as build_omega_z with T_z Psi replaced by free Y.
QuadraticFormMatrix build_omega_z_check(const Eigen::VectorXd& T_z,
                                        const Eigen::MatrixXd& Y_z,
                                        const Eigen::MatrixXd& Y_u,
                                        const Dims& dims);

/// Same structure as build_omega_g with T_g Psi replaced by free Y.
QuadraticFormMatrix build_omega_g_check(const Eigen::VectorXd& T_g,
                                        const Eigen::MatrixXd& Y_gz,
                                        const Eigen::MatrixXd& Y_gu,
                                        const Dims& dims);

/// Performance form: p'Mp = 1'g_pm - gamma - gamma_u1 1'u_pm
/// - gamma_u2 ||u~||^2 on realizable p.
QuadraticFormMatrix build_omega_gamma(double gamma, double gamma_u1,
                                      double gamma_u2, const Dims& dims);

/// Writes the matrix as row-major CSV with 17 significant digits.
void dump_form_csv(const std::string& path, const QuadraticFormMatrix& form);

}  // namespace robustify
