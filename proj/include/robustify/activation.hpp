#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robustify {

/// Scalar activation applied component-wise inside an implicit network.
///
/// Every shipped kind is [0, 1]-slope restricted: for s1 != s2 the secant
/// (phi(s1) - phi(s2)) / (s1 - s2) lies in [slope_lo, slope_hi] = [0, 1].
/// kCustomSampled is a piecewise-linear interpolant through user-supplied
/// knots, extended linearly with the first and last segment slopes; its
/// knots are validated against the declared slope bounds.
class Activation {
 public:
  enum class Kind { kReLU, kTanh, kSigmoidShifted, kCustomSampled };

  Activation() = default;

  static Activation relu() { return Activation(Kind::kReLU); }
  static Activation tanh() { return Activation(Kind::kTanh); }
  /// sigmoid(s) - 1/2, so that phi(0) = 0. Slopes lie in (0, 1/4].
  static Activation sigmoid_shifted() {
    return Activation(Kind::kSigmoidShifted);
  }
  /// Throws std::invalid_argument if the knots are unsorted, fewer than two,
  /// or produce a segment slope outside [0, 1].
  static Activation custom_sampled(std::vector<double> knots_x,
                                   std::vector<double> knots_y);

  Kind kind() const { return kind_; }
  double slope_lo() const { return slope_lo_; }
  double slope_hi() const { return slope_hi_; }
  const std::vector<double>& knots_x() const { return knots_x_; }
  const std::vector<double>& knots_y() const { return knots_y_; }

  bool is_relu() const { return kind_ == Kind::kReLU; }

  double operator()(double s) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& s) const;

  std::string name() const;
  /// Inverse of name() for the built-in kinds; custom activations are parsed
  /// by the network reader.
  static Activation from_name(const std::string& name);

  bool operator==(const Activation& other) const;

 private:
  explicit Activation(Kind kind) : kind_(kind) {}

  Kind kind_ = Kind::kReLU;
  double slope_lo_ = 0.0;
  double slope_hi_ = 1.0;
  std::vector<double> knots_x_;
  std::vector<double> knots_y_;
};

/// max{0, v} component-wise.
Eigen::VectorXd relu(const Eigen::VectorXd& v);

/// |v| computed as relu(v) + relu(-v).
Eigen::VectorXd abs_via_relu(const Eigen::VectorXd& v);

}  // namespace robustify
