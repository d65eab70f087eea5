#include "robustify/lcp.hpp"

#include <cmath>
#include <vector>

namespace robustify {
namespace {

// Exact re-solve on the support found by pivoting; removes tableau round-off.
void polish(const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
            LcpSolution* sol) {
  const Eigen::Index n = q.size();
  const double scale = 1.0 + sol->z.lpNorm<Eigen::Infinity>();
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol->z(i) > 1e-13 * scale) support.push_back(i);
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (!support.empty()) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd Mss(k, k);
    Eigen::VectorXd qs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      qs(a) = q(support[a]);
      for (Eigen::Index b = 0; b < k; ++b) Mss(a, b) = M(support[a], support[b]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Mss);
    if (std::abs(lu.determinant()) == 0.0) return;
    const Eigen::VectorXd zs = lu.solve(-qs);
    for (Eigen::Index a = 0; a < k; ++a) {
      if (!(zs(a) >= 0.0)) return;
      z(support[a]) = zs(a);
    }
  }
  const Eigen::VectorXd w = M * z + q;
  const double tol = 1e-12 * (1.0 + q.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z(i) == 0.0 && w(i) < -tol) return;
  }
  // Compare complementarity quality against the pivoting answer.
  const double old_err = (sol->w.cwiseMin(0.0)).lpNorm<Eigen::Infinity>() +
                         std::abs(sol->z.dot(sol->w));
  const double new_err = (w.cwiseMin(0.0)).lpNorm<Eigen::Infinity>() +
                         std::abs(z.dot(w));
  if (new_err <= old_err + tol) {
    sol->z = z;
    sol->w = w;
  }
}

}  // namespace

LcpSolution solve_lcp(const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
                      int max_pivots) {
  const Eigen::Index n = q.size();
  LcpSolution sol;
  sol.z = Eigen::VectorXd::Zero(n);
  sol.w = q;
  if (n == 0 || q.minCoeff() >= 0.0) {
    sol.solved = true;
    return sol;
  }
  if (max_pivots <= 0) max_pivots = static_cast<int>(std::max<Eigen::Index>(1000, 50 * n));

  // Columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1).
  const Eigen::Index z0 = 2 * n;
  const Eigen::Index rhs = 2 * n + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, 2 * n + 2);
  T.leftCols(n).setIdentity();
  T.block(0, n, n, n) = -M;
  T.col(z0).setConstant(-1.0);
  T.col(rhs) = q;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) basis[static_cast<std::size_t>(i)] = i;

  auto pivot = [&](Eigen::Index r, Eigen::Index c) {
    T.row(r) /= T(r, c);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != r && T(i, c) != 0.0) T.row(i) -= T(i, c) * T.row(r);
    }
    basis[static_cast<std::size_t>(r)] = c;
  };

  // Initial pivot: lexicographically smallest (q_i, e_i), i.e. most negative
  // q with ties going to the largest index.
  Eigen::Index r = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (q(i) <= q(r)) r = i;
  }
  Eigen::Index leaving = basis[static_cast<std::size_t>(r)];
  pivot(r, z0);

  const double eps = 1e-12;
  for (int it = 0; it < max_pivots; ++it) {
    sol.pivots = it + 1;
    const Eigen::Index entering = leaving < n ? leaving + n : leaving - n;
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = T(i, entering);
      if (d <= eps) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      // Lexicographic minimum of [rhs, B^-1 row] / d.
      const double db = T(best, entering);
      int cmp = 0;
      for (Eigen::Index k = -1; k < n && cmp == 0; ++k) {
        const Eigen::Index col = k < 0 ? rhs : k;
        const double a = T(i, col) / d;
        const double b = T(best, col) / db;
        const double tol = 1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)));
        if (a < b - tol) cmp = -1;
        else if (a > b + tol) cmp = 1;
      }
      if (cmp < 0 || (cmp == 0 && basis[static_cast<std::size_t>(i)] == z0)) best = i;
    }
    if (best < 0) return sol;  // secondary ray
    leaving = basis[static_cast<std::size_t>(best)];
    pivot(best, entering);
    if (leaving == z0) {
      sol.z.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index b = basis[static_cast<std::size_t>(i)];
        if (b >= n && b < 2 * n) sol.z(b - n) = std::max(0.0, T(i, rhs));
      }
      sol.w = M * sol.z + q;
      sol.solved = true;
      polish(M, q, &sol);
      return sol;
    }
  }
  return sol;
}

}  // namespace robustify
