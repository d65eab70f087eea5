#include "robustify/activation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace robustify {

Activation Activation::custom_sampled(std::vector<double> knots_x,
                                      std::vector<double> knots_y) {
  if (knots_x.size() != knots_y.size() || knots_x.size() < 2) {
    throw std::invalid_argument(
        "custom activation needs at least two (x, y) knots of equal count");
  }
  for (std::size_t k = 0; k + 1 < knots_x.size(); ++k) {
    const double dx = knots_x[k + 1] - knots_x[k];
    if (!(dx > 0.0)) {
      throw std::invalid_argument("custom activation knots must increase");
    }
    const double slope = (knots_y[k + 1] - knots_y[k]) / dx;
    if (slope < 0.0 || slope > 1.0 || !std::isfinite(slope)) {
      throw std::invalid_argument(
          "custom activation segment slope outside [0, 1]");
    }
  }
  Activation a(Kind::kCustomSampled);
  a.knots_x_ = std::move(knots_x);
  a.knots_y_ = std::move(knots_y);
  return a;
}

double Activation::operator()(double s) const {
  switch (kind_) {
    case Kind::kReLU:
      return s > 0.0 ? s : 0.0;
    case Kind::kTanh:
      return std::tanh(s);
    case Kind::kSigmoidShifted:
      return 1.0 / (1.0 + std::exp(-s)) - 0.5;
    case Kind::kCustomSampled: {
      const auto& xs = knots_x_;
      const auto& ys = knots_y_;
      std::size_t seg;
      if (s <= xs.front()) {
        seg = 0;
      } else if (s >= xs.back()) {
        seg = xs.size() - 2;
      } else {
        seg = static_cast<std::size_t>(
                  std::upper_bound(xs.begin(), xs.end(), s) - xs.begin()) -
              1;
      }
      const double slope = (ys[seg + 1] - ys[seg]) / (xs[seg + 1] - xs[seg]);
      return ys[seg] + slope * (s - xs[seg]);
    }
  }
  return 0.0;
}

Eigen::VectorXd Activation::apply(const Eigen::VectorXd& s) const {
  if (kind_ == Kind::kReLU) return robustify::relu(s);
  Eigen::VectorXd out(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) out(i) = (*this)(s(i));
  return out;
}

std::string Activation::name() const {
  switch (kind_) {
    case Kind::kReLU:
      return "relu";
    case Kind::kTanh:
      return "tanh";
    case Kind::kSigmoidShifted:
      return "sigmoid_shifted";
    case Kind::kCustomSampled:
      return "custom_sampled";
  }
  return "unknown";
}

Activation Activation::from_name(const std::string& name) {
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  if (name == "sigmoid_shifted") return sigmoid_shifted();
  throw std::invalid_argument("unknown activation '" + name + "'");
}

bool Activation::operator==(const Activation& other) const {
  return kind_ == other.kind_ && slope_lo_ == other.slope_lo_ &&
         slope_hi_ == other.slope_hi_ && knots_x_ == other.knots_x_ &&
         knots_y_ == other.knots_y_;
}

Eigen::VectorXd relu(const Eigen::VectorXd& v) {
  return v.cwiseMax(0.0);
}

Eigen::VectorXd abs_via_relu(const Eigen::VectorXd& v) {
  return relu(v) + relu(-v);
}

}  // namespace robustify
