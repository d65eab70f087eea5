#pragma once

#include <Eigen/Dense>

namespace robustify {

struct LcpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd w;  // M z + q
  bool solved = false;
  int pivots = 0;
};

/// Lemke's complementary pivoting with a lexicographic ratio test.
/// Finds z >= 0 with w = M z + q >= 0 and z'w = 0. Terminates for P-matrices
/// and for positive semidefinite M whenever a solution exists; `solved` is
/// false on ray termination or when max_pivots is exhausted.
LcpSolution solve_lcp(const Eigen::MatrixXd& M, const Eigen::VectorXd& q,
                      int max_pivots = 0);

}  // namespace robustify
