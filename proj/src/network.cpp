#include "robustify/network.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

#include "robustify/errors.hpp"
#include "robustify/lcp.hpp"

namespace robustify {
namespace {

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const char* name, const Eigen::MatrixXd& m, Eigen::Index r,
                  Eigen::Index c) {
  if (m.rows() != r || m.cols() != c) {
    throw DimensionMismatch(std::string(name) + " is " + shape(m) +
                            ", expected " + std::to_string(r) + "x" +
                            std::to_string(c));
  }
}

void expect_finite(const char* name, const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(name) + " has non-finite entries");
  }
}

double residual_inf(const ImplicitNetwork& net, const Eigen::VectorXd& q,
                    const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  return (x - net.activation.apply(net.state_weights * x + q))
      .lpNorm<Eigen::Infinity>();
}

// Exact equilibrium for ReLU: with s = W x + q, x = relu(s) and
// w = x - s = relu(-s) are complementary, so x solves LCP(I - W, -q).
bool solve_relu_equilibrium(const ImplicitNetwork& net,
                            const Eigen::VectorXd& q, double tol,
                            Eigen::VectorXd* x) {
  const Eigen::Index n = q.size();
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(n, n) - net.state_weights;
  const LcpSolution sol = solve_lcp(M, -q);
  if (!sol.solved) return false;
  Eigen::VectorXd z = sol.z;
  // A couple of plain substitutions clean up the last ulps.
  for (int k = 0; k < 3 && residual_inf(net, q, z) > tol; ++k) {
    z = net.activation.apply(net.state_weights * z + q);
  }
  if (residual_inf(net, q, z) > tol) return false;
  *x = z;
  return true;
}

struct IterationOutcome {
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

IterationOutcome damped_iteration(const ImplicitNetwork& net,
                                  const Eigen::VectorXd& q,
                                  const FixedPointConfig& cfg) {
  const Eigen::Index n = q.size();
  const double a = cfg.damping;
  auto step = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (1.0 - a) * x +
           a * net.activation.apply(net.state_weights * x + q);
  };

  IterationOutcome out;
  out.x = Eigen::VectorXd::Zero(n);
  out.residual = residual_inf(net, q, out.x);
  const double start = out.residual;
  const auto depth = static_cast<std::size_t>(cfg.anderson_depth);
  std::deque<Eigen::VectorXd> dG, dF;
  Eigen::VectorXd g_prev, f_prev;

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (out.residual <= cfg.tol) {
      out.converged = true;
      return out;
    }
    out.iterations = it + 1;
    const Eigen::VectorXd g = step(out.x);
    const Eigen::VectorXd f = g - out.x;
    Eigen::VectorXd next = g;
    if (depth > 0) {
      if (g_prev.size() == n) {
        dG.push_back(g - g_prev);
        dF.push_back(f - f_prev);
        if (dG.size() > depth) {
          dG.pop_front();
          dF.pop_front();
        }
      }
      g_prev = g;
      f_prev = f;
      if (!dF.empty()) {
        const auto m = static_cast<Eigen::Index>(dF.size());
        Eigen::MatrixXd Fm(n, m), Gm(n, m);
        for (Eigen::Index j = 0; j < m; ++j) {
          Fm.col(j) = dF[static_cast<std::size_t>(j)];
          Gm.col(j) = dG[static_cast<std::size_t>(j)];
        }
        const Eigen::VectorXd coef =
            Fm.completeOrthogonalDecomposition().solve(f);
        if (coef.allFinite()) next = g - Gm * coef;
      }
    }
    const double r_next = residual_inf(net, q, next);
    if (depth > 0 && !(r_next <= 2.0 * out.residual)) {
      // Reject the extrapolated point and restart the history.
      dG.clear();
      dF.clear();
      g_prev.resize(0);
      next = g;
      out.x = next;
      out.residual = residual_inf(net, q, next);
    } else {
      out.x = next;
      out.residual = r_next;
    }
    if (!std::isfinite(out.residual) ||
        out.residual > 1e12 * (1.0 + start)) {
      return out;  // diverging
    }
  }
  out.converged = out.residual <= cfg.tol;
  return out;
}

}  // namespace

void ImplicitNetwork::validate() const {
  const Eigen::Index n = state_weights.rows();
  const Eigen::Index n_u = input_weights.cols();
  const Eigen::Index n_g = output_state_weights.rows();
  expect_shape("W_x", state_weights, n, n);
  expect_shape("W_u", input_weights, n, n_u);
  expect_shape("W_fx", output_state_weights, n_g, n);
  expect_shape("W_fu", output_input_weights, n_g, n_u);
  expect_shape("b", state_bias, n, 1);
  expect_shape("b_f", output_bias, n_g, 1);
  expect_finite("W_x", state_weights);
  expect_finite("W_u", input_weights);
  expect_finite("W_fx", output_state_weights);
  expect_finite("W_fu", output_input_weights);
  expect_finite("b", state_bias);
  expect_finite("b_f", output_bias);
}

ImplicitNetwork ImplicitNetwork::zeros(NetworkDims d) {
  if (d.n < 0 || d.n_u < 0 || d.n_g < 0) {
    throw DimensionMismatch("negative network dimension");
  }
  ImplicitNetwork net;
  net.state_weights = Eigen::MatrixXd::Zero(d.n, d.n);
  net.input_weights = Eigen::MatrixXd::Zero(d.n, d.n_u);
  net.output_state_weights = Eigen::MatrixXd::Zero(d.n_g, d.n);
  net.output_input_weights = Eigen::MatrixXd::Zero(d.n_g, d.n_u);
  net.state_bias = Eigen::VectorXd::Zero(d.n);
  net.output_bias = Eigen::VectorXd::Zero(d.n_g);
  return net;
}

bool ImplicitNetwork::operator==(const ImplicitNetwork& o) const {
  auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(state_weights, o.state_weights) &&
         same(input_weights, o.input_weights) &&
         same(output_state_weights, o.output_state_weights) &&
         same(output_input_weights, o.output_input_weights) &&
         same(state_bias, o.state_bias) && same(output_bias, o.output_bias) &&
         activation == o.activation;
}

void FixedPointConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw std::invalid_argument("damping must lie in (0, 1]");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (anderson_depth < 0) {
    throw std::invalid_argument("anderson_depth must be >= 0");
  }
}

Evaluation evaluate(const ImplicitNetwork& net, const Eigen::VectorXd& u,
                    const FixedPointConfig& cfg) {
  cfg.validate();
  if (u.size() != net.input_weights.cols()) {
    throw DimensionMismatch("input has size " + std::to_string(u.size()) +
                            ", network expects " +
                            std::to_string(net.input_weights.cols()));
  }
  const Eigen::VectorXd q = net.input_weights * u + net.state_bias;
  Evaluation ev;
  bool done = false;
  if (net.activation.is_relu() && cfg.relu_direct) {
    done = solve_relu_equilibrium(net, q, cfg.tol, &ev.state);
  }
  if (!done) {
    IterationOutcome it = damped_iteration(net, q, cfg);
    ev.iterations = it.iterations;
    if (it.converged) {
      ev.state = std::move(it.x);
      done = true;
    } else if (net.activation.is_relu() && cfg.relu_fallback &&
               !cfg.relu_direct) {
      done = solve_relu_equilibrium(net, q, cfg.tol, &ev.state);
    }
    if (!done) throw NonConvergence(cfg.max_iters, it.residual);
  }
  ev.output = net.output_state_weights * ev.state +
              net.output_input_weights * u + net.output_bias;
  return ev;
}

double equilibrium_residual(const ImplicitNetwork& net,
                            const Eigen::VectorXd& u,
                            const Eigen::VectorXd& x) {
  if (u.size() != net.input_weights.cols() ||
      x.size() != net.state_weights.rows()) {
    throw DimensionMismatch("state or input size does not match network");
  }
  return residual_inf(net, net.input_weights * u + net.state_bias, x);
}

}  // namespace robustify
