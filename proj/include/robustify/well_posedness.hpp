#pragma once

#include <string>

#include <Eigen/Dense>

#include "robustify/conic.hpp"

namespace robustify {

struct WellPosednessResult {
  /// True when He(T (I - W)) >= margin * I with margin > threshold, which
  /// guarantees a unique equilibrium for every [0, 1]-slope activation.
  bool certified = false;
  Eigen::VectorXd T;   // diagonal multiplier, normalized to sum n
  double margin = 0.0; // min eigenvalue of He(T (I - W))
  SolveStatus status = SolveStatus::kNumericalFailure;
  std::string message;
};

/// Maximizes the margin over diagonal T >= t_floor with sum(T) = n. A
/// margin at or below `threshold` is inconclusive: the test is only
/// sufficient.
WellPosednessResult well_posedness_certificate(const Eigen::MatrixXd& W_x,
                                               ConicBackend& backend,
                                               double t_floor = 1e-6,
                                               double threshold = 1e-8,
                                               const SolverOptions& opts = {});

}  // namespace robustify
