#pragma once

#include <Eigen/Dense>

#include "robustify/activation.hpp"

namespace robustify {

/// (n, n_u, n_g): internal state count, input size, output size.
struct NetworkDims {
  int n = 0;
  int n_u = 0;
  int n_g = 0;

  bool operator==(const NetworkDims&) const = default;
};

/// Implicit (equilibrium) network
///
///   x    = phi(state_weights * x + input_weights * u + state_bias)
///   f(u) = output_state_weights * x + output_input_weights * u + output_bias
///
/// The same type holds an original network and its robustified counterpart.
struct ImplicitNetwork {
  Eigen::MatrixXd state_weights;         // n x n
  Eigen::MatrixXd input_weights;         // n x n_u
  Eigen::MatrixXd output_state_weights;  // n_g x n
  Eigen::MatrixXd output_input_weights;  // n_g x n_u
  Eigen::VectorXd state_bias;            // n
  Eigen::VectorXd output_bias;           // n_g
  Activation activation = Activation::relu();

  NetworkDims dims() const {
    return {static_cast<int>(state_weights.rows()),
            static_cast<int>(input_weights.cols()),
            static_cast<int>(output_state_weights.rows())};
  }

  /// Throws DimensionMismatch on inconsistent shapes and std::invalid_argument
  /// on non-finite entries.
  void validate() const;

  /// All-zero network of the given size with ReLU activation.
  static ImplicitNetwork zeros(NetworkDims dims);

  bool operator==(const ImplicitNetwork& other) const;
};

/// Options for the equilibrium solve.
///
/// The default path is the damped iteration x <- (1 - a) x + a phi(W x + q),
/// optionally Anderson-accelerated. ReLU networks additionally have an exact
/// route: the equilibrium is the solution of a linear complementarity
/// problem, solved by complementary pivoting. `relu_direct` takes that route
/// first; `relu_fallback` takes it after the iteration fails.
struct FixedPointConfig {
  double damping = 0.5;
  double tol = 1e-10;  // infinity-norm residual ||x - phi(W x + q)||
  int max_iters = 100000;
  int anderson_depth = 0;  // 0 disables acceleration
  bool relu_direct = false;
  bool relu_fallback = true;

  void validate() const;
};

struct Evaluation {
  Eigen::VectorXd output;
  Eigen::VectorXd state;
  int iterations = 0;
};

/// Solves for the equilibrium state at input u and returns the output.
/// Throws NonConvergence if no route reaches cfg.tol.
Evaluation evaluate(const ImplicitNetwork& net, const Eigen::VectorXd& u,
                    const FixedPointConfig& cfg = {});

/// ||x - phi(W x + W_u u + b)||_inf for a candidate state.
double equilibrium_residual(const ImplicitNetwork& net,
                            const Eigen::VectorXd& u,
                            const Eigen::VectorXd& x);

}  // namespace robustify
