#pragma once

#include <random>

#include <Eigen/Dense>

#include "robustify/network.hpp"

namespace robustify::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * g(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

inline Eigen::VectorXd random_positive(std::mt19937_64& rng, int n,
                                       double lo = 0.1, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Random network whose state matrix has spectral norm `contraction` < 1,
/// so the fixed-point iteration converges for any [0, 1]-slope activation.
inline ImplicitNetwork random_network(std::mt19937_64& rng, int n, int n_u, int n_g,
                                      double contraction = 0.8,
                                      Activation act = Activation::relu()) {
  ImplicitNetwork net;
  Eigen::MatrixXd W = random_matrix(rng, n, n);
  if (n > 0) {
    const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(W).singularValues()(0);
    W *= contraction / s;
  }
  net.state_weights = W;
  net.input_weights = random_matrix(rng, n, n_u);
  net.output_state_weights = random_matrix(rng, n_g, n);
  net.output_input_weights = random_matrix(rng, n_g, n_u);
  net.state_bias = random_vector(rng, n, 0.5);
  net.output_bias = random_vector(rng, n_g, 0.5);
  net.activation = act;
  return net;
}

}  // namespace robustify::testing
