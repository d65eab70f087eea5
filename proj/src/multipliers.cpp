#include "robustify/multipliers.hpp"

#include <stdexcept>

#include "robustify/csv.hpp"
#include "robustify/errors.hpp"

namespace robustify {
namespace {

void check_dims(const Dims& d) {
  if (d.n < 0 || d.n_u < 0 || d.n_g < 0) {
    throw DimensionMismatch("negative dimension");
  }
}

void check(const char* what, Eigen::Index got_r, Eigen::Index got_c,
           Eigen::Index want_r, Eigen::Index want_c) {
  if (got_r != want_r || got_c != want_c) {
    throw DimensionMismatch(std::string(what) + " is " +
                            std::to_string(got_r) + "x" +
                            std::to_string(got_c) + ", expected " +
                            std::to_string(want_r) + "x" +
                            std::to_string(want_c));
  }
}

// Writes B at (r, c) and B' at (c, r).
void put_pair(Eigen::MatrixXd& M, int r, int c, const Eigen::MatrixXd& B) {
  M.block(r, c, B.rows(), B.cols()) = B;
  M.block(c, r, B.cols(), B.rows()) = B.transpose();
}

// Shared by the Psi and Y variants so the substitution identity is exact:
// the (z, z) block is He(X - T) and the (z, u) block is Xu.
Eigen::MatrixXd state_form(const Eigen::VectorXd& T, const Eigen::MatrixXd& X,
                           const Eigen::MatrixXd& Xu, const Dims& d) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d.N_p(), d.N_p());
  const int z = d.z();
  for (int i = 0; i < d.n; ++i) {
    for (int j = 0; j < d.n; ++j) {
      M(z + i, z + j) = i == j ? 2.0 * (X(i, i) - T(i)) : X(i, j) + X(j, i);
    }
  }
  put_pair(M, z, d.u(), Xu);
  return M;
}

Eigen::MatrixXd output_form(const Eigen::VectorXd& T, const Eigen::MatrixXd& Xz,
                            const Eigen::MatrixXd& Xu, const Dims& d) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d.N_p(), d.N_p());
  for (int i = 0; i < d.n_g; ++i) {
    M(d.g_plus() + i, d.g_plus() + i) = -T(i);
    M(d.g_minus() + i, d.g_minus() + i) = -T(i);
  }
  put_pair(M, d.g_plus(), d.z(), Xz);
  put_pair(M, d.g_minus(), d.z(), -Xz);
  put_pair(M, d.g_plus(), d.u(), Xu);
  put_pair(M, d.g_minus(), d.u(), -Xu);
  return M;
}

Eigen::MatrixXd scale_rows(const Eigen::VectorXd& T, const Eigen::MatrixXd& P) {
  return T.asDiagonal() * P;
}

}  // namespace

std::string to_string(FormTag tag) {
  switch (tag) {
    case FormTag::kOmegaZ: return "Omega_z";
    case FormTag::kOmegaU: return "Omega_u";
    case FormTag::kOmegaG: return "Omega_g";
    case FormTag::kOmegaCheckZ: return "OmegaCheck_z";
    case FormTag::kOmegaCheckG: return "OmegaCheck_g";
    case FormTag::kOmegaGamma: return "Omega_gamma";
  }
  return "unknown";
}

void InputPairSet::validate() const {
  if (!(eps_u1 >= 0.0) || !(eps_u2 >= 0.0)) {
    throw std::invalid_argument("input-pair tolerances must be nonnegative");
  }
}

bool InputPairSet::contains(const Eigen::VectorXd& u1,
                            const Eigen::VectorXd& u2) const {
  if (u1.size() != u2.size()) throw DimensionMismatch("input pair sizes differ");
  const Eigen::VectorXd du = u1 - u2;
  return du.lpNorm<1>() <= eps_u1 && du.squaredNorm() <= eps_u2;
}

IncrementalVector make_incremental(const Dims& d, const Eigen::VectorXd& g_tilde,
                                   const Eigen::VectorXd& u_tilde,
                                   const Eigen::VectorXd& z_tilde) {
  check_dims(d);
  check("g increment", g_tilde.size(), 1, d.n_g, 1);
  check("u increment", u_tilde.size(), 1, d.n_u, 1);
  check("z increment", z_tilde.size(), 1, d.n, 1);
  IncrementalVector p;
  p.g_pm.resize(2 * d.n_g);
  p.g_pm << relu(g_tilde), relu(-g_tilde);
  p.u_pm.resize(2 * d.n_u);
  p.u_pm << relu(u_tilde), relu(-u_tilde);
  p.z_tilde = z_tilde;
  p.u_tilde = u_tilde;
  p.flat.resize(d.N_p());
  p.flat << p.g_pm, p.u_pm, z_tilde, u_tilde, p.one;
  return p;
}

IncrementalVector assemble_p(const ImplicitNetwork& net,
                             const Eigen::VectorXd& u1,
                             const Eigen::VectorXd& u2,
                             const FixedPointConfig& cfg) {
  const Evaluation e1 = evaluate(net, u1, cfg);
  const Evaluation e2 = evaluate(net, u2, cfg);
  const Eigen::VectorXd z_tilde = e2.state - e1.state;
  const Eigen::VectorXd u_tilde = u2 - u1;
  const Eigen::VectorXd g_tilde = net.output_state_weights * z_tilde +
                                  net.output_input_weights * u_tilde;
  return make_incremental(Dims(net.dims()), g_tilde, u_tilde, z_tilde);
}

QuadraticFormMatrix build_omega_z(const Eigen::VectorXd& T_z,
                                  const Eigen::MatrixXd& Psi_z,
                                  const Eigen::MatrixXd& Psi_u,
                                  const Dims& d) {
  check_dims(d);
  check("T_z", T_z.size(), 1, d.n, 1);
  check("Psi_z", Psi_z.rows(), Psi_z.cols(), d.n, d.n);
  check("Psi_u", Psi_u.rows(), Psi_u.cols(), d.n, d.n_u);
  return {FormTag::kOmegaZ,
          state_form(T_z, scale_rows(T_z, Psi_z), scale_rows(T_z, Psi_u), d)};
}

QuadraticFormMatrix build_omega_z_check(const Eigen::VectorXd& T_z,
                                        const Eigen::MatrixXd& Y_z,
                                        const Eigen::MatrixXd& Y_u,
                                        const Dims& d) {
  check_dims(d);
  check("T_z", T_z.size(), 1, d.n, 1);
  check("Y_z", Y_z.rows(), Y_z.cols(), d.n, d.n);
  check("Y_u", Y_u.rows(), Y_u.cols(), d.n, d.n_u);
  return {FormTag::kOmegaCheckZ, state_form(T_z, Y_z, Y_u, d)};
}

QuadraticFormMatrix build_omega_g(const Eigen::VectorXd& T_g,
                                  const Eigen::MatrixXd& Psi_gz,
                                  const Eigen::MatrixXd& Psi_gu,
                                  const Dims& d) {
  check_dims(d);
  check("T_g", T_g.size(), 1, d.n_g, 1);
  check("Psi_gz", Psi_gz.rows(), Psi_gz.cols(), d.n_g, d.n);
  check("Psi_gu", Psi_gu.rows(), Psi_gu.cols(), d.n_g, d.n_u);
  return {FormTag::kOmegaG, output_form(T_g, scale_rows(T_g, Psi_gz),
                                        scale_rows(T_g, Psi_gu), d)};
}

QuadraticFormMatrix build_omega_g_check(const Eigen::VectorXd& T_g,
                                        const Eigen::MatrixXd& Y_gz,
                                        const Eigen::MatrixXd& Y_gu,
                                        const Dims& d) {
  check_dims(d);
  check("T_g", T_g.size(), 1, d.n_g, 1);
  check("Y_gz", Y_gz.rows(), Y_gz.cols(), d.n_g, d.n);
  check("Y_gu", Y_gu.rows(), Y_gu.cols(), d.n_g, d.n_u);
  return {FormTag::kOmegaCheckG, output_form(T_g, Y_gz, Y_gu, d)};
}

QuadraticFormMatrix build_omega_u(double T_u1, double T_u2,
                                  const InputPairSet& pairset, const Dims& d) {
  check_dims(d);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d.N_p(), d.N_p());
  const int one = d.one();
  for (int i = 0; i < 2 * d.n_u; ++i) {
    const int r = d.u_plus() + i;
    M(r, r) = -0.5 * T_u2;
    M(r, one) = -0.5 * T_u1;
    M(one, r) = -0.5 * T_u1;
  }
  for (int i = 0; i < d.n_u; ++i) M(d.u() + i, d.u() + i) = -0.5 * T_u2;
  M(one, one) = T_u1 * pairset.eps_u1 + pairset.eps_u2 * T_u2;
  return {FormTag::kOmegaU, M};
}

QuadraticFormMatrix build_omega_gamma(double gamma, double gamma_u1,
                                      double gamma_u2, const Dims& d) {
  check_dims(d);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d.N_p(), d.N_p());
  const int one = d.one();
  for (int i = 0; i < 2 * d.n_g; ++i) {
    M(d.g_plus() + i, one) = 0.5;
    M(one, d.g_plus() + i) = 0.5;
  }
  for (int i = 0; i < 2 * d.n_u; ++i) {
    const int r = d.u_plus() + i;
    M(r, r) = -0.5 * gamma_u2;
    M(r, one) = -0.5 * gamma_u1;
    M(one, r) = -0.5 * gamma_u1;
  }
  for (int i = 0; i < d.n_u; ++i) M(d.u() + i, d.u() + i) = -0.5 * gamma_u2;
  M(one, one) = -gamma;
  return {FormTag::kOmegaGamma, M};
}

void dump_form_csv(const std::string& path, const QuadraticFormMatrix& form) {
  write_matrix_csv(path, form.M);
}

}  // namespace robustify
