#include "robustify/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "robustify/csv.hpp"
#include "robustify/errors.hpp"

namespace robustify {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void require_pd(const MatrixXd& M, const char* what) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) {
    throw NonPositiveDefinite(std::string(what) + " is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NonPositiveDefinite(what);
}

// Exact solve of the equality-constrained QP on a candidate active set.
bool solve_on_active_set(const CondensedQP& qp, const VectorXd& w, const VectorXd& h,
                         const std::vector<int>& active, QpSolution* out) {
  const Eigen::Index m = qp.num_inputs();
  const auto k = static_cast<Eigen::Index>(active.size());
  MatrixXd KKT = MatrixXd::Zero(m + k, m + k);
  VectorXd rhs(m + k);
  KKT.topLeftCorner(m, m) = qp.H;
  rhs.head(m) = -qp.F * w;
  for (Eigen::Index a = 0; a < k; ++a) {
    const Eigen::Index r = active[static_cast<std::size_t>(a)];
    KKT.block(0, m + a, m, 1) = qp.G.row(r).transpose();
    KKT.block(m + a, 0, 1, m) = qp.G.row(r);
    rhs(m + a) = h(r);
  }
  Eigen::FullPivLU<MatrixXd> lu(KKT);
  if (!lu.isInvertible()) return false;
  const VectorXd sol = lu.solve(rhs);
  out->v = sol.head(m);
  out->lambda = VectorXd::Zero(qp.G.rows());
  for (Eigen::Index a = 0; a < k; ++a) {
    out->lambda(active[static_cast<std::size_t>(a)]) = sol(m + a);
  }
  out->kkt_residual = qp_kkt_residual(qp, w, out->v, out->lambda);
  return true;
}

// Primal-dual active-set steps from a candidate set: drop constraints with
// negative multipliers, add violated ones, stop on repetition.
bool polish(const CondensedQP& qp, const VectorXd& w, const VectorXd& h,
            std::vector<int> active, double tol, QpSolution* out) {
  std::vector<std::vector<int>> seen;
  QpSolution cand;
  for (int pass = 0; pass < 50; ++pass) {
    if (std::find(seen.begin(), seen.end(), active) != seen.end()) return false;
    seen.push_back(active);
    if (!solve_on_active_set(qp, w, h, active, &cand)) return false;
    if (cand.kkt_residual <= tol) {
      cand.iterations = out->iterations;
      *out = cand;
      return true;
    }
    const VectorXd Gv = qp.G * cand.v;
    std::vector<int> next;
    for (Eigen::Index i = 0; i < qp.G.rows(); ++i) {
      const bool in = std::binary_search(active.begin(), active.end(), static_cast<int>(i));
      if ((in && cand.lambda(i) > 0.0) || (!in && Gv(i) > h(i))) {
        next.push_back(static_cast<int>(i));
      }
    }
    active = std::move(next);
  }
  return false;
}

}  // namespace

void MpcProblem::validate() const {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      P.rows() != n || P.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw DimensionMismatch("MPC matrices have inconsistent sizes");
  }
  if (N < 1) throw std::invalid_argument("horizon must be at least 1");
  if (!(v_bound > 0.0)) throw std::invalid_argument("input bound must be positive");
  require_pd(Q, "Q");
  require_pd(R, "R");
  require_pd(P, "P");
}

MpcProblem MpcProblem::default_preset() {
  MpcProblem m;
  m.A.resize(2, 2);
  m.A << 4.0 / 3.0, -2.0 / 3.0, 1.0, 0.0;
  m.B.resize(2, 1);
  m.B << 0.0, 1.0;
  m.Q.resize(2, 2);
  m.Q << 1.0, -2.0 / 3.0, -2.0 / 3.0, 1.5;
  m.R = MatrixXd::Ones(1, 1);
  m.P.resize(2, 2);
  m.P << 7.1667, -4.2222, -4.2222, 4.6852;
  m.N = 10;
  m.v_bound = 10.0;
  return m;
}

double CondensedQP::cost(const VectorXd& w, const VectorXd& V) const {
  return V.dot(H * V) + 2.0 * w.dot(F.transpose() * V) + w.dot(state_cost * w);
}

CondensedQP condense_qp(const MpcProblem& mpc) {
  mpc.validate();
  const int nx = mpc.state_dim();
  const int nv = mpc.input_dim();
  const int N = mpc.N;
  // Stacked states [w_1; ...; w_N] = Phi w_0 + Gamma V.
  MatrixXd Phi(N * nx, nx);
  MatrixXd Gamma = MatrixXd::Zero(N * nx, N * nv);
  MatrixXd Ak = mpc.A;
  for (int i = 0; i < N; ++i) {
    Phi.middleRows(i * nx, nx) = Ak;
    Ak = mpc.A * Ak;
  }
  for (int i = 0; i < N; ++i) {
    MatrixXd blk = mpc.B;  // A^(i-j) B
    for (int j = i; j >= 0; --j) {
      Gamma.block(i * nx, j * nv, nx, nv) = blk;
      blk = mpc.A * blk;
    }
  }
  MatrixXd Qbar = MatrixXd::Zero(N * nx, N * nx);
  for (int i = 0; i + 1 < N; ++i) Qbar.block(i * nx, i * nx, nx, nx) = mpc.Q;
  Qbar.block((N - 1) * nx, (N - 1) * nx, nx, nx) = mpc.P;
  MatrixXd Rbar = MatrixXd::Zero(N * nv, N * nv);
  for (int i = 0; i < N; ++i) Rbar.block(i * nv, i * nv, nv, nv) = mpc.R;

  CondensedQP qp;
  qp.H = Gamma.transpose() * Qbar * Gamma + Rbar;
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.F = Gamma.transpose() * Qbar * Phi;
  qp.state_cost = Phi.transpose() * Qbar * Phi;
  const int m = N * nv;
  qp.G.resize(2 * m, m);
  qp.G << MatrixXd::Identity(m, m), -MatrixXd::Identity(m, m);
  qp.G /= mpc.v_bound;
  qp.S_v = MatrixXd::Zero(2 * m, nx);
  qp.c = VectorXd::Ones(2 * m);
  Eigen::LLT<MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) throw NonPositiveDefinite("condensed Hessian");
  return qp;
}

ImplicitNetwork qp_to_implicit_network(const CondensedQP& qp) {
  Eigen::FullPivLU<MatrixXd> lu(qp.H);
  if (!lu.isInvertible()) throw SingularMatrix("condensed Hessian");
  const MatrixXd HiGt = lu.solve(qp.G.transpose());
  const MatrixXd HiF = lu.solve(qp.F);
  const Eigen::Index nc = qp.G.rows();
  ImplicitNetwork net;
  net.state_weights = MatrixXd::Identity(nc, nc) - qp.G * HiGt;
  net.input_weights = -(qp.S_v + qp.G * HiF);
  net.state_bias = -qp.c;
  net.output_state_weights = -HiGt;
  net.output_input_weights = -HiF;
  net.output_bias = VectorXd::Zero(qp.H.rows());
  net.activation = Activation::relu();
  net.validate();
  return net;
}

double qp_kkt_residual(const CondensedQP& qp, const VectorXd& w,
                       const VectorXd& v, const VectorXd& lambda) {
  const VectorXd h = qp.S_v * w + qp.c;
  const VectorXd slack = h - qp.G * v;
  double r = (qp.H * v + qp.F * w + qp.G.transpose() * lambda)
                 .lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    r = std::max(r, -slack(i));
    r = std::max(r, -lambda(i));
    r = std::max(r, std::abs(lambda(i) * slack(i)));
  }
  return r;
}

QpSolution solve_qp_oracle(const CondensedQP& qp, const VectorXd& w,
                           const QpOracleOptions& opts) {
  if (w.size() != qp.state_dim()) {
    throw DimensionMismatch("state has size " + std::to_string(w.size()) +
                            ", QP expects " + std::to_string(qp.state_dim()));
  }
  const Eigen::Index m = qp.num_inputs();
  const Eigen::Index nc = qp.G.rows();
  const VectorXd h = qp.S_v * w + qp.c;
  // ADMM on  min 1/2 v'(2H)v + (2Fw)'v  s.t.  y = G v,  y <= h.
  const MatrixXd P = 2.0 * qp.H;
  const VectorXd q = 2.0 * qp.F * w;
  const double rho = opts.rho;
  const double sigma = opts.sigma;
  const MatrixXd Kmat = P + sigma * MatrixXd::Identity(m, m) +
                        rho * qp.G.transpose() * qp.G;
  Eigen::LLT<MatrixXd> llt(Kmat);
  if (llt.info() != Eigen::Success) throw NonPositiveDefinite("ADMM system");

  VectorXd v = VectorXd::Zero(m);
  VectorXd y = VectorXd::Zero(nc);
  VectorXd mu = VectorXd::Zero(nc);
  QpSolution best;
  best.v = v;
  best.lambda = VectorXd::Zero(nc);
  best.kkt_residual = qp_kkt_residual(qp, w, v, best.lambda);
  const double act_tol = 1e-6 * (1.0 + h.cwiseAbs().maxCoeff());
  std::vector<int> last_active{-1};

  for (int it = 1; it <= opts.max_iters; ++it) {
    v = llt.solve(sigma * v - q + qp.G.transpose() * (rho * y - mu));
    const VectorXd Gv = qp.G * v;
    y = (Gv + mu / rho).cwiseMin(h);
    mu += rho * (Gv - y);
    best.iterations = it;
    if (it % 10 != 0) continue;
    std::vector<int> active;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (mu(i) > 0.0 || Gv(i) >= h(i) - act_tol) active.push_back(static_cast<int>(i));
    }
    if (active != last_active) {
      last_active = active;
      if (polish(qp, w, h, active, opts.tol, &best)) return best;
    }
    const VectorXd lam = 0.5 * mu;
    const double r = qp_kkt_residual(qp, w, v, lam);
    if (r <= opts.tol) {
      best.v = v;
      best.lambda = lam;
      best.kkt_residual = r;
      return best;
    }
  }
  throw MaxIterations("QP oracle", opts.max_iters);
}

VectorXd policy_sequence(const Policy& policy, const VectorXd& w) {
  if (const auto* np = std::get_if<NetworkPolicy>(&policy)) {
    return evaluate(np->net, w, np->cfg).output;
  }
  const auto& qp = std::get<QpPolicy>(policy);
  return solve_qp_oracle(qp.qp, w, qp.opts).v;
}

Trajectory simulate_closed_loop(const MpcProblem& mpc, const Policy& policy,
                                const VectorXd& w0, int steps) {
  mpc.validate();
  if (w0.size() != mpc.state_dim()) {
    throw DimensionMismatch("initial state has wrong size");
  }
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  const int nv = mpc.input_dim();
  Trajectory t;
  t.w.push_back(w0);
  for (int k = 0; k < steps; ++k) {
    const VectorXd seq = policy_sequence(policy, t.w.back());
    if (seq.size() < nv) throw DimensionMismatch("policy output too short");
    const VectorXd v = seq.head(nv);
    t.v.push_back(v);
    t.w.push_back(mpc.A * t.w.back() + mpc.B * v);
  }
  return t;
}

double trajectory_deviation(const Trajectory& a, const Trajectory& b) {
  if (a.w.size() != b.w.size() || a.v.size() != b.v.size()) {
    throw DimensionMismatch("trajectories have different lengths");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < a.w.size(); ++k) {
    d = std::max(d, (a.w[k] - b.w[k]).lpNorm<Eigen::Infinity>());
  }
  for (std::size_t k = 0; k < a.v.size(); ++k) {
    d = std::max(d, (a.v[k] - b.v[k]).lpNorm<Eigen::Infinity>());
  }
  return d;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t,
                          bool timestamp) {
  CsvWriter csv(out, timestamp);
  const Eigen::Index nx = t.w.empty() ? 0 : t.w.front().size();
  const Eigen::Index nv = t.v.empty() ? 1 : t.v.front().size();
  std::vector<std::string> cols{"k"};
  for (Eigen::Index i = 0; i < nx; ++i) cols.push_back("w" + std::to_string(i + 1));
  if (nv == 1) {
    cols.push_back("v");
  } else {
    for (Eigen::Index i = 0; i < nv; ++i) cols.push_back("v" + std::to_string(i + 1));
  }
  csv.header(cols);
  for (std::size_t k = 0; k < t.w.size(); ++k) {
    csv.cell(static_cast<long long>(k));
    for (Eigen::Index i = 0; i < nx; ++i) csv.cell(t.w[k](i));
    for (Eigen::Index i = 0; i < nv; ++i) {
      if (k < t.v.size()) {
        csv.cell(t.v[k](i));
      } else {
        csv.cell(std::string());
      }
    }
    csv.end_row();
  }
}

}  // namespace robustify
