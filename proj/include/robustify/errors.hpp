#pragma once

#include <stdexcept>
#include <string>

namespace robustify {

/// Array shapes that do not agree with the declared dimensions.
class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what)
      : std::invalid_argument("dimension mismatch: " + what) {}
};

/// A structured-text document that does not follow the expected schema.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what)
      : std::runtime_error("schema error: " + what) {}
};

/// The equilibrium solve of an implicit network failed; the network may be
/// ill-posed for this input.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(int max_iters, double residual)
      : std::runtime_error("fixed-point iteration did not converge after " +
                           std::to_string(max_iters) +
                           " iterations (residual " + std::to_string(residual) +
                           ")"),
        max_iters_(max_iters),
        residual_(residual) {}

  int max_iters() const { return max_iters_; }
  double residual() const { return residual_; }

 private:
  int max_iters_;
  double residual_;
};

class NonPositiveDefinite : public std::runtime_error {
 public:
  explicit NonPositiveDefinite(const std::string& what)
      : std::runtime_error("matrix is not positive definite: " + what) {}
};

class SingularMatrix : public std::runtime_error {
 public:
  explicit SingularMatrix(const std::string& what)
      : std::runtime_error("singular matrix: " + what) {}
};

class MaxIterations : public std::runtime_error {
 public:
  MaxIterations(const std::string& what, int iters)
      : std::runtime_error(what + " reached the iteration limit (" +
                           std::to_string(iters) + ")") {}
};

}  // namespace robustify
