#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>

#include "robustify/conic.hpp"
#include "robustify/errors.hpp"

namespace robustify {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Merit (worst residual over its tolerance) below which the Newton system is
// solved in long double.
constexpr double kExtendedMerit = 1e4;

struct Block {
  int dim = 0;
  MatrixXd F0;
  std::vector<std::pair<int, SparseSymMatrix>> terms;
};

// Per-block Nesterov-Todd scaling: S = G Lambda G', Z = G^-T Lambda G^-1.
struct Scaling {
  MatrixXd G, Ginv, Winv;
  VectorXd lambda;
};

bool nt_scaling(const MatrixXd& S, const MatrixXd& Z, Scaling* sc) {
  Eigen::LLT<MatrixXd> ls(S), lz(Z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  const MatrixXd L = ls.matrixL();
  const MatrixXd R = lz.matrixL();
  Eigen::JacobiSVD<MatrixXd> svd(R.transpose() * L,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd d = svd.singularValues();
  if (!(d.minCoeff() > 0.0)) return false;
  const VectorXd dis = d.cwiseSqrt().cwiseInverse();
  sc->lambda = d;
  sc->G = L * svd.matrixV() * dis.asDiagonal();
  sc->Ginv = dis.asDiagonal() * svd.matrixU().transpose() * R.transpose();
  sc->Winv = sc->Ginv.transpose() * sc->Ginv;
  return true;
}

// Largest a with Lambda + a * dX >= 0 for the scaled direction dX.
double psd_step(const VectorXd& lambda, const MatrixXd& dX) {
  const VectorXd li = lambda.cwiseSqrt().cwiseInverse();
  MatrixXd M = li.asDiagonal() * dX * li.asDiagonal();
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  return lo >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lo;
}

double orthant_step(const VectorXd& x, const VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

// Solves  K dtheta - E' dy = rhs,  E dtheta = r_eq.
template <typename T>
class KktSolver {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit KktSolver(const MatrixXd& E) : E_(E.cast<T>()) {
    const Eigen::Index n = E_.cols();
    const Eigen::Index m = E_.rows();
    if (m == 0) return;
    qr_.compute(E_.transpose());
    rank_ = qr_.rank();
    // Null-space elimination pays off when few directions remain free;
    // otherwise the equalities are folded in with an augmented term.
    const double null_cost = 2.0 * n * n * static_cast<double>(n - rank_);
    const double aug_cost = n * n * (n / 3.0 + 2.0 * m);
    use_null_space_ = null_cost < aug_cost;
    if (use_null_space_) {
      const Mat Q = qr_.householderQ();
      Q1_ = Q.leftCols(rank_);
      N_ = Q.rightCols(n - rank_);
      R11_ = qr_.matrixR().topLeftCorner(rank_, rank_).template triangularView<Eigen::Upper>();
    }
  }

  bool factor(Mat K) {
    K_ = std::move(K);
    const Eigen::Index m = E_.rows();
    if (m == 0) return chol(K_, &llt_);
    if (use_null_space_) {
      if (N_.cols() == 0) return true;
      const Mat KN = K_ * N_;
      const Mat Kr = N_.transpose() * KN;
      return chol(0.5 * (Kr + Kr.transpose()), &llt_);
    }
    const T kmax = std::max(T(1), K_.diagonal().maxCoeff());
    T emax = 1;
    for (Eigen::Index i = 0; i < m; ++i) emax = std::max(emax, E_.row(i).squaredNorm());
    rho_ = kmax / emax;
    const Mat Ka = K_ + rho_ * E_.transpose() * E_;
    if (!chol(0.5 * (Ka + Ka.transpose()), &llt_)) return false;
    KiEt_ = llt_.solve(E_.transpose());
    const Mat S = E_ * KiEt_;
    return chol(0.5 * (S + S.transpose()), &llt_eq_);
  }

  // Solve plus a few steps of iterative refinement against the exact K.
  void solve(const Vec& rhs, const Vec& r_eq, Vec* dtheta, Vec* dy) const {
    solve_once(rhs, r_eq, dtheta, dy);
    const T scale = 1 + rhs.template lpNorm<Eigen::Infinity>();
    const T floor = 10 * std::numeric_limits<T>::epsilon() * scale;
    for (int k = 0; k < 3; ++k) {
      Vec res1 = rhs - K_ * (*dtheta);
      if (E_.rows()) res1 += E_.transpose() * (*dy);
      const Vec res2 = E_.rows() ? Vec(r_eq - E_ * (*dtheta)) : Vec();
      const T err = std::max(res1.template lpNorm<Eigen::Infinity>(),
                             E_.rows() ? res2.template lpNorm<Eigen::Infinity>() : T(0));
      if (!(err > floor)) break;
      Vec ct, cy;
      solve_once(res1, res2, &ct, &cy);
      *dtheta += ct;
      if (E_.rows()) *dy += cy;
    }
  }

  const Mat& E() const { return E_; }

 private:
  void solve_once(const Vec& rhs, const Vec& r_eq, Vec* dtheta, Vec* dy) const {
    const Eigen::Index m = E_.rows();
    if (m == 0) {
      *dtheta = llt_.solve(rhs);
      dy->resize(0);
      return;
    }
    if (use_null_space_) {
      const auto& P = qr_.colsPermutation();
      const Vec pr = P.transpose() * r_eq;
      const Vec a = R11_.transpose().template triangularView<Eigen::Lower>().solve(
          pr.head(rank_));
      Vec dt = Q1_ * a;
      if (N_.cols() > 0) {
        const Vec w = llt_.solve(N_.transpose() * (rhs - K_ * dt));
        dt += N_ * w;
      }
      const Vec v = K_ * dt - rhs;
      Vec yhat = Vec::Zero(m);
      yhat.head(rank_) = R11_.template triangularView<Eigen::Upper>().solve(
          Q1_.transpose() * v);
      *dy = P * yhat;
      *dtheta = dt;
      return;
    }
    const Vec r1 = rhs + rho_ * E_.transpose() * r_eq;
    const Vec t = llt_.solve(r1);
    *dy = llt_eq_.solve(r_eq - E_ * t);
    *dtheta = t + KiEt_ * (*dy);
  }

  static bool chol(const Mat& A, Eigen::LLT<Mat>* llt) {
    llt->compute(A);
    if (llt->info() == Eigen::Success) return true;
    const T scale = std::max(T(1), A.diagonal().cwiseAbs().maxCoeff());
    for (T reg = 1e-14; reg <= 1e-6; reg *= 100) {
      Mat B = A;
      B.diagonal().array() += reg * scale;
      llt->compute(B);
      if (llt->info() == Eigen::Success) return true;
    }
    return false;
  }

  Mat E_;
  Eigen::ColPivHouseholderQR<Mat> qr_;
  Eigen::Index rank_ = 0;
  bool use_null_space_ = false;
  Mat Q1_, N_, R11_;
  Mat K_;
  Mat KiEt_;
  T rho_ = 0;
  Eigen::LLT<Mat> llt_, llt_eq_;
};

struct Iterate {
  VectorXd theta;
  std::vector<MatrixXd> S, Z;
  VectorXd s, z, y;
};

struct Direction {
  VectorXd dtheta, ds, dz, dy;
  std::vector<MatrixXd> dS, dZ;
};

MatrixXd sym(const MatrixXd& X) { return 0.5 * (X + X.transpose()); }

struct ProblemData {
  const std::vector<Block>& blocks;
  const std::vector<LinearRow>& ineq;
  const MatrixXd& E;
  int n = 0;
};

// Newton system of one iteration in scalar type T. Assembly, solve and the
// recovery of the dual blocks share T so that the dual equation holds to the
// precision of T, independently of how well the scaling is conditioned.
template <typename T>
class NewtonSystem {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  NewtonSystem(const ProblemData& pd) : pd_(pd), kkt_(pd.E) {}

  bool prepare(const std::vector<Scaling>& sc, const Iterate& it,
               const std::vector<MatrixXd>& rP, const VectorXd& r_lin,
               const VectorXd& r_eq, const VectorXd& r_d) {
    const std::size_t nb = pd_.blocks.size();
    Ginv_.resize(nb);
    rP_.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      Ginv_[k] = sc[k].Ginv.cast<T>();
      rP_[k] = rP[k].cast<T>();
    }
    r_lin_ = r_lin.cast<T>();
    r_eq_ = r_eq.cast<T>();
    r_d_ = r_d.cast<T>();
    s_ = it.s.cast<T>();
    z_ = it.z.cast<T>();

    const int n = pd_.n;
    Mat K = Mat::Zero(n, n);
    for (std::size_t k = 0; k < nb; ++k) {
      const Block& b = pd_.blocks[k];
      const Mat Wi = Ginv_[k].transpose() * Ginv_[k];
      Mat P(b.dim, b.dim);
      for (std::size_t ti = 0; ti < b.terms.size(); ++ti) {
        const auto& [vi, Fi] = b.terms[ti];
        P.setZero();
        for (const auto& e : Fi.entries()) {
          const T v = e.value;
          if (e.row == e.col) {
            P.noalias() += v * Wi.col(e.row) * Wi.col(e.row).transpose();
          } else {
            P.noalias() += v * Wi.col(e.row) * Wi.col(e.col).transpose();
            P.noalias() += v * Wi.col(e.col) * Wi.col(e.row).transpose();
          }
        }
        for (std::size_t tj = ti; tj < b.terms.size(); ++tj) {
          const auto& [vj, Fj] = b.terms[tj];
          const T v = inner(Fj, P);
          K(vi, vj) += v;
          if (vi != vj) K(vj, vi) += v;
        }
      }
    }
    const auto m_in = static_cast<Eigen::Index>(pd_.ineq.size());
    for (Eigen::Index i = 0; i < m_in; ++i) {
      const T d = z_(i) / s_(i);
      const auto& row = pd_.ineq[i].coeffs;
      for (const auto& [a, va] : row) {
        for (const auto& [bb, vb] : row) K(a, bb) += d * T(va) * T(vb);
      }
    }
    return kkt_.factor(std::move(K));
  }

  // Direction for the scaled complementarity target Xi (per block) and the
  // linear target rc. Returns the final dual-equation error.
  T direction(const std::vector<MatrixXd>& Xi, const VectorXd& rc, Direction* out,
              double d_scale, int verbosity, std::ostream& log) const {
    const std::size_t nb = pd_.blocks.size();
    const bool has_ineq = !pd_.ineq.empty();
    const bool has_eq = pd_.E.rows() > 0;
    std::vector<Mat> X(nb);
    for (std::size_t k = 0; k < nb; ++k) X[k] = Xi[k].cast<T>();
    const Vec rcT = rc.cast<T>();

    Vec rhs = -r_d_;
    for (std::size_t k = 0; k < nb; ++k) {
      const Mat Wi = Ginv_[k].transpose() * Ginv_[k];
      const Mat R = Ginv_[k].transpose() * X[k] * Ginv_[k] - Wi * rP_[k] * Wi;
      adj_map(pd_.blocks[k], R, rhs);
    }
    if (has_ineq) rhs -= At_mul((rcT - z_.cwiseProduct(r_lin_)).cwiseQuotient(s_));

    Vec dtheta, dy;
    kkt_.solve(rhs, r_eq_, &dtheta, &dy);
    std::vector<Mat> dS(nb), dZ(nb);
    Vec ds, dz;
    auto recover = [&] {
      for (std::size_t k = 0; k < nb; ++k) {
        dS[k] = lin_map(pd_.blocks[k], dtheta) + rP_[k];
        dS[k] = T(0.5) * (dS[k] + dS[k].transpose()).eval();
        const Mat dSh = Ginv_[k] * dS[k] * Ginv_[k].transpose();
        dZ[k] = Ginv_[k].transpose() * (X[k] - dSh) * Ginv_[k];
        dZ[k] = T(0.5) * (dZ[k] + dZ[k].transpose()).eval();
      }
      if (has_ineq) {
        ds = -A_mul(dtheta) + r_lin_;
        dz = (rcT - z_.cwiseProduct(ds)).cwiseQuotient(s_);
      }
    };
    auto dual_error = [&] {
      Vec e = -r_d_;
      for (std::size_t k = 0; k < nb; ++k) adj_map(pd_.blocks[k], dZ[k], e);
      if (has_ineq) e -= At_mul(dz);
      if (has_eq) e += kkt_.E().transpose() * dy;
      return e;
    };
    recover();
    // The assembled Schur matrix and the map that recovers dZ drift apart
    // when the scaling is badly conditioned; refine against the latter.
    T prev = std::numeric_limits<T>::infinity();
    Vec keep_theta, keep_y;
    T err = 0;
    for (int pass = 0; pass < 4; ++pass) {
      const Vec e = dual_error();
      err = e.template lpNorm<Eigen::Infinity>();
      if (verbosity > 2) log << "    refine " << pass << " " << static_cast<double>(err) << '\n';
      if (err >= prev) {
        dtheta = keep_theta;
        dy = keep_y;
        recover();
        err = prev;
        break;
      }
      if (!(err > T(1e-14) * d_scale) || err > T(0.5) * prev) break;
      prev = err;
      keep_theta = dtheta;
      keep_y = dy;
      const Vec req = has_eq ? Vec(r_eq_ - kkt_.E() * dtheta) : Vec();
      Vec ct, cy;
      kkt_.solve(e, req, &ct, &cy);
      dtheta += ct;
      if (has_eq) dy += cy;
      recover();
    }

    out->dtheta = dtheta.template cast<double>();
    out->dy = dy.template cast<double>();
    out->dS.resize(nb);
    out->dZ.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      out->dS[k] = dS[k].template cast<double>();
      out->dZ[k] = dZ[k].template cast<double>();
    }
    if (has_ineq) {
      out->ds = ds.template cast<double>();
      out->dz = dz.template cast<double>();
    }
    return err;
  }

 private:
  static T inner(const SparseSymMatrix& F, const Mat& X) {
    T acc = 0;
    for (const auto& e : F.entries()) {
      acc += e.row == e.col ? T(e.value) * X(e.row, e.row)
                            : T(e.value) * (X(e.row, e.col) + X(e.col, e.row));
    }
    return acc;
  }

  static void adj_map(const Block& b, const Mat& X, Vec& out) {
    for (const auto& [var, F] : b.terms) out(var) += inner(F, X);
  }

  Mat lin_map(const Block& b, const Vec& x) const {
    Mat X = Mat::Zero(b.dim, b.dim);
    for (const auto& [var, F] : b.terms) {
      for (const auto& e : F.entries()) {
        const T v = T(e.value) * x(var);
        X(e.row, e.col) += v;
        if (e.row != e.col) X(e.col, e.row) += v;
      }
    }
    return X;
  }

  Vec A_mul(const Vec& x) const {
    Vec out(static_cast<Eigen::Index>(pd_.ineq.size()));
    for (std::size_t i = 0; i < pd_.ineq.size(); ++i) {
      T acc = 0;
      for (const auto& [j, a] : pd_.ineq[i].coeffs) acc += T(a) * x(j);
      out(static_cast<Eigen::Index>(i)) = acc;
    }
    return out;
  }

  Vec At_mul(const Vec& v) const {
    Vec out = Vec::Zero(pd_.n);
    for (std::size_t i = 0; i < pd_.ineq.size(); ++i) {
      for (const auto& [j, a] : pd_.ineq[i].coeffs) {
        out(j) += T(a) * v(static_cast<Eigen::Index>(i));
      }
    }
    return out;
  }

  const ProblemData& pd_;
  KktSolver<T> kkt_;
  std::vector<Mat> Ginv_, rP_;
  Vec r_lin_, r_eq_, r_d_, s_, z_;
};

}  // namespace

SolverResult InteriorPointSolver::solve(const ConicProgram& prog,
                                        const SolverOptions& opts) {
  prog.validate();
  std::ostream& log = opts.log ? *opts.log : std::clog;
  const int n = prog.num_vars;
  const VectorXd& c = prog.objective;

  std::vector<Block> blocks;
  for (const auto& pb : prog.psd_blocks) {
    if (pb.dim == 0) continue;
    PsdConstraint copy = pb;
    copy.compress();
    Block b;
    b.dim = copy.dim;
    b.F0 = copy.constant.dense();
    b.terms = copy.terms;
    blocks.push_back(std::move(b));
  }
  const auto m_in = static_cast<Eigen::Index>(prog.inequalities.size());
  const auto m_eq = static_cast<Eigen::Index>(prog.equalities.size());
  VectorXd bvec(m_in);
  for (Eigen::Index i = 0; i < m_in; ++i) bvec(i) = prog.inequalities[i].rhs;
  MatrixXd E = MatrixXd::Zero(m_eq, n);
  VectorXd dvec(m_eq);
  for (Eigen::Index i = 0; i < m_eq; ++i) {
    for (const auto& [j, a] : prog.equalities[i].coeffs) E(i, j) += a;
    dvec(i) = prog.equalities[i].rhs;
  }
  auto At_mul = [&](const VectorXd& v) {
    VectorXd out = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m_in; ++i) {
      for (const auto& [j, a] : prog.inequalities[i].coeffs) out(j) += a * v(i);
    }
    return out;
  };
  auto lin_map = [&](const Block& b, const VectorXd& x) {
    MatrixXd X = MatrixXd::Zero(b.dim, b.dim);
    for (const auto& [var, F] : b.terms) F.add_to(X, x(var));
    return X;
  };
  auto adj_map = [&](const Block& b, const MatrixXd& X, VectorXd& out) {
    for (const auto& [var, F] : b.terms) out(var) += F.inner(X);
  };

  double nu = static_cast<double>(m_in);
  double f0_norm = 0.0;
  for (const auto& b : blocks) {
    nu += b.dim;
    f0_norm = std::max(f0_norm, b.F0.cwiseAbs().maxCoeff());
  }
  const double b_norm = m_in ? bvec.lpNorm<Eigen::Infinity>() : 0.0;
  const double d_norm = m_eq ? dvec.lpNorm<Eigen::Infinity>() : 0.0;
  const double c_norm = n ? c.lpNorm<Eigen::Infinity>() : 0.0;
  const double p_scale = 1.0 + std::max({f0_norm, b_norm, d_norm});
  const double d_scale = 1.0 + c_norm;

  SolverResult res;
  res.theta = VectorXd::Zero(n);
  if (nu == 0.0 && m_eq == 0) {
    // Only a linear objective: bounded iff it is zero.
    if (c_norm == 0.0) {
      res.status = SolveStatus::kOptimal;
    } else {
      res.message = "unbounded: no constraints";
    }
    return res;
  }

  const ProblemData pd{blocks, prog.inequalities, E, n};
  NewtonSystem<double> newton_d(pd);
  std::optional<NewtonSystem<long double>> newton_ld;

  Iterate it;
  it.theta = VectorXd::Zero(n);
  for (const auto& b : blocks) {
    it.S.push_back(MatrixXd::Identity(b.dim, b.dim));
    it.Z.push_back(MatrixXd::Identity(b.dim, b.dim));
  }
  it.s = VectorXd::Ones(m_in);
  it.z = VectorXd::Ones(m_in);
  it.y = VectorXd::Zero(m_eq);

  const std::size_t nb = blocks.size();
  std::vector<Scaling> sc(nb);
  std::vector<MatrixXd> rP(nb);
  VectorXd r_lin, r_eq, r_d;

  auto objectives = [&](double* pobj, double* dobj) {
    *pobj = c.dot(it.theta);
    double d = 0.0;
    for (std::size_t k = 0; k < nb; ++k) d -= (blocks[k].F0.cwiseProduct(it.Z[k])).sum();
    if (m_in) d -= bvec.dot(it.z);
    if (m_eq) d += dvec.dot(it.y);
    *dobj = d;
  };

  res.status = SolveStatus::kNumericalFailure;
  res.message = "iteration limit reached";
  // Best iterate by normalized merit; degenerate programmes often stall just
  // short of the tolerances while the linear algebra loses accuracy.
  struct Best {
    double merit = std::numeric_limits<double>::infinity();
    int iter = -1;
    VectorXd theta;
    double pobj = 0.0, dobj = 0.0;
    double rel_p = 0.0, rel_d = 0.0, rel_gap = 0.0;
  } best;
  int stall = 0;
  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    res.iterations = iter;
    // Residuals.
    double pres = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      rP[k] = blocks[k].F0 + lin_map(blocks[k], it.theta) - it.S[k];
      pres = std::max(pres, rP[k].cwiseAbs().maxCoeff());
    }
    r_lin.resize(m_in);
    for (Eigen::Index i = 0; i < m_in; ++i) {
      long double acc = bvec(i);
      for (const auto& [j, a] : prog.inequalities[i].coeffs) acc -= (long double)a * it.theta(j);
      r_lin(i) = static_cast<double>(acc - it.s(i));
    }
    r_eq = dvec - E * it.theta;
    if (m_in) pres = std::max(pres, r_lin.lpNorm<Eigen::Infinity>());
    if (m_eq) pres = std::max(pres, r_eq.lpNorm<Eigen::Infinity>());
    VectorXd aty = VectorXd::Zero(n);  // A*(Z) - A'z + E'y
    for (std::size_t k = 0; k < nb; ++k) adj_map(blocks[k], it.Z[k], aty);
    if (m_in) aty -= At_mul(it.z);
    if (m_eq) aty += E.transpose() * it.y;
    r_d = c - aty;
    const double dres = n ? r_d.lpNorm<Eigen::Infinity>() : 0.0;
    double pobj, dobj;
    objectives(&pobj, &dobj);
    double compl_sum = m_in ? it.s.dot(it.z) : 0.0;
    for (std::size_t k = 0; k < nb; ++k) compl_sum += (it.S[k].cwiseProduct(it.Z[k])).sum();
    const double mu = compl_sum / nu;
    const double rel_p = pres / p_scale;
    const double rel_d = dres / d_scale;
    const double rel_gap = std::max(std::abs(pobj - dobj), compl_sum) /
                           (1.0 + std::abs(pobj) + std::abs(dobj));
    if (opts.verbosity > 0) {
      log << std::scientific << std::setprecision(3) << "ipm " << std::setw(3)
          << iter << "  pobj " << pobj << "  dobj " << dobj << "  pinf "
          << rel_p << "  dinf " << rel_d << "  gap " << rel_gap << '\n';
    }
    res.theta = it.theta;
    res.objective_value = pobj;
    res.dual_objective = dobj;
    res.rel_primal_residual = rel_p;
    res.rel_dual_residual = rel_d;
    res.rel_gap = rel_gap;
    const double merit = std::max({rel_p / opts.feas_tol, rel_d / opts.feas_tol,
                                   rel_gap / opts.gap_tol});
    if (merit < best.merit) {
      stall = best.merit < opts.relaxed_factor && merit > 0.5 * best.merit ? stall + 1 : 0;
      best = {merit, iter, it.theta, pobj, dobj, rel_p, rel_d, rel_gap};
    } else {
      ++stall;
    }
    if (best.merit <= opts.relaxed_factor && stall >= 4) {
      res.message = "progress stalled";
      break;
    }
    if (rel_p <= opts.feas_tol && rel_d <= opts.feas_tol &&
        rel_gap <= opts.gap_tol) {
      res.status = SolveStatus::kOptimal;
      res.message.clear();
      break;
    }
    if (dobj > 0.0 && aty.lpNorm<Eigen::Infinity>() <= opts.infeas_tol * dobj &&
        rel_p > opts.feas_tol) {
      res.status = SolveStatus::kInfeasible;
      res.message = "dual ray certifies primal infeasibility";
      break;
    }
    if (rel_p <= opts.feas_tol && pobj < -1e10 * d_scale) {
      res.message = "objective appears unbounded below";
      break;
    }
    if (iter == opts.max_iters) break;

    // Scaling and Schur complement.
    bool ok = true;
    for (std::size_t k = 0; k < nb && ok; ++k) ok = nt_scaling(it.S[k], it.Z[k], &sc[k]);
    if (!ok) {
      res.message = "lost positive definiteness of an iterate";
      break;
    }
    // Late iterations switch to extended precision; early ones do not need it.
    const bool extended = opts.extended_precision && best.merit <= kExtendedMerit;
    bool factored = false;
    if (extended) {
      if (!newton_ld) newton_ld.emplace(pd);
      factored = newton_ld->prepare(sc, it, rP, r_lin, r_eq, r_d);
    } else {
      factored = newton_d.prepare(sc, it, rP, r_lin, r_eq, r_d);
    }
    if (!factored) {
      res.message = "Schur complement is not positive definite";
      break;
    }
    auto direction = [&](const std::vector<MatrixXd>& Xi, const VectorXd& rc,
                         Direction* dir) {
      if (extended) {
        newton_ld->direction(Xi, rc, dir, d_scale, opts.verbosity, log);
      } else {
        newton_d.direction(Xi, rc, dir, d_scale, opts.verbosity, log);
      }
    };
    auto step_lengths = [&](const Direction& dir, double* ap, double* ad) {
      *ap = std::numeric_limits<double>::infinity();
      *ad = *ap;
      for (std::size_t k = 0; k < nb; ++k) {
        *ap = std::min(*ap, psd_step(sc[k].lambda,
                                     sc[k].Ginv * dir.dS[k] * sc[k].Ginv.transpose()));
        *ad = std::min(*ad, psd_step(sc[k].lambda,
                                     sc[k].G.transpose() * dir.dZ[k] * sc[k].G));
      }
      if (opts.verbosity > 2) log << "    psd steps " << *ap << " " << *ad << '\n';
      if (m_in) {
        *ap = std::min(*ap, orthant_step(it.s, dir.ds));
        *ad = std::min(*ad, orthant_step(it.z, dir.dz));
      }
    };

    // Predictor.
    std::vector<MatrixXd> Xi(nb);
    for (std::size_t k = 0; k < nb; ++k) Xi[k] = -MatrixXd(sc[k].lambda.asDiagonal());
    VectorXd rc = m_in ? VectorXd(-it.s.cwiseProduct(it.z)) : VectorXd();
    Direction aff;
    direction(Xi, rc, &aff);
    double ap, ad;
    step_lengths(aff, &ap, &ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      mu_aff += ((it.S[k] + ap * aff.dS[k]).cwiseProduct(it.Z[k] + ad * aff.dZ[k])).sum();
    }
    if (m_in) mu_aff += (it.s + ap * aff.ds).dot(it.z + ad * aff.dz);
    mu_aff /= nu;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector.
    for (std::size_t k = 0; k < nb; ++k) {
      const MatrixXd dSh = sc[k].Ginv * aff.dS[k] * sc[k].Ginv.transpose();
      const MatrixXd dZh = sc[k].G.transpose() * aff.dZ[k] * sc[k].G;
      const MatrixXd second = dSh * dZh + dZh * dSh;
      const VectorXd& lam = sc[k].lambda;
      const int dim = blocks[k].dim;
      for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
          double num = -second(i, j);
          if (i == j) num += 2.0 * sigma * mu - 2.0 * lam(i) * lam(i);
          Xi[k](i, j) = num / (lam(i) + lam(j));
        }
      }
    }
    if (m_in) {
      rc = VectorXd::Constant(m_in, sigma * mu) - it.s.cwiseProduct(it.z) -
           aff.ds.cwiseProduct(aff.dz);
    }
    Direction dir;
    direction(Xi, rc, &dir);
    step_lengths(dir, &ap, &ad);
    // Short steps signal poor centrality; back off further from the boundary.
    const double factor = 0.9 + 0.08 * std::min({ap, ad, 1.0});
    ap = std::min(1.0, factor * ap);
    ad = std::min(1.0, factor * ad);
    if (opts.verbosity > 1) log << "    steps " << ap << " " << ad << " sigma " << sigma << '\n';
    if (ap < 1e-12 && ad < 1e-12) {
      res.message = "step length collapsed";
      break;
    }
    it.theta += ap * dir.dtheta;
    for (std::size_t k = 0; k < nb; ++k) {
      it.S[k] = sym(it.S[k] + ap * dir.dS[k]);
      it.Z[k] = sym(it.Z[k] + ad * dir.dZ[k]);
    }
    if (m_in) {
      it.s += ap * dir.ds;
      it.z += ad * dir.dz;
    }
    if (m_eq) it.y += ad * dir.dy;
  }

  if (res.status == SolveStatus::kNumericalFailure && best.iter >= 0 &&
      best.merit <= opts.relaxed_factor) {
    res.status = SolveStatus::kOptimal;
    res.theta = best.theta;
    res.objective_value = best.pobj;
    res.dual_objective = best.dobj;
    res.rel_primal_residual = best.rel_p;
    res.rel_dual_residual = best.rel_d;
    res.rel_gap = best.rel_gap;
    res.message = "reduced accuracy (" + res.message + ")";
    if (opts.verbosity > 0) log << "ipm accepted iterate " << best.iter << " at reduced accuracy\n";
  }
  const FeasibilityReport rep = verify_solution(prog, res.theta);
  res.min_eigenvalue = std::min(0.0, rep.min_eigenvalue);
  res.ineq_violation = rep.max_ineq_violation;
  res.eq_violation = rep.max_eq_violation;
  return res;
}

}  // namespace robustify
