#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "robustify/conic.hpp"
#include "robustify/multipliers.hpp"
#include "robustify/network.hpp"
#include "robustify/synthesis.hpp"

namespace robustify {

/// Monte-Carlo sampling of input pairs from an InputPairSet.
///
/// u1 is uniform in the box center +- radius. The increment direction is
/// uniform on the sphere and its length is a fraction of the largest step
/// allowed by the tighter of the two norm constraints: even-indexed samples
/// use a fraction in [0.95, 1], odd-indexed ones a Beta(5, 1) draw.
struct SampleSpec {
  InputPairSet pairset;
  int count = 1000;
  std::uint64_t seed = 0;
  Eigen::VectorXd center;  // n_u
  double radius = 5.0;

  void validate() const;
};

using InputPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

std::vector<InputPair> sample_input_pairs(const SampleSpec& spec);

struct Counterexample {
  Eigen::VectorXd u1, u2;
  double lhs = 0.0;  // ||f(u1) - f(u2)||_1
  double rhs = 0.0;  // certificate bound
};

struct BoundCheckReport {
  int samples = 0;
  int violations = 0;
  double worst_margin = 0.0;        // max of lhs - rhs
  double empirical_gamma_lb = 0.0;  // max of lhs - gain terms
  double max_lhs = 0.0;
  std::vector<Counterexample> counterexamples;  // first few violations
};

struct CheckOptions {
  double tolerance = 1e-6;  // margin above which a pair counts as violating
  int jobs = 1;
  int max_counterexamples = 16;
  FixedPointConfig fp;
};

/// Samples pairs and compares the output deviation against the certificate.
/// Propagates NonConvergence from the network evaluation.
BoundCheckReport empirical_bound_check(const ImplicitNetwork& net,
                                       const RobustnessCertificate& cert,
                                       const SampleSpec& spec,
                                       const CheckOptions& opts = {});

void write_counterexamples_json(const std::string& path,
                                const ImplicitNetwork& net,
                                const RobustnessCertificate& cert,
                                const BoundCheckReport& report);

/// Minima of the three scalar constraint forms over sampled pairs, each
/// normalized by 1 + ||p||^2.
struct LemmaReport {
  double min_s_z = 0.0;
  double min_s_u = 0.0;
  double min_s_g = 0.0;
  double min_scaled_s_z = 0.0;
  double min_scaled_s_u = 0.0;
  double min_scaled_s_g = 0.0;
  int samples = 0;

  bool passes(double tol = 1e-8) const {
    return min_scaled_s_z >= -tol && min_scaled_s_u >= -tol &&
           min_scaled_s_g >= -tol;
  }
};

LemmaReport lemma_property_suite(const ImplicitNetwork& net,
                                 const MultiplierSet& multipliers,
                                 const SampleSpec& spec,
                                 const FixedPointConfig& fp = {});

struct SweepRow {
  double eps = 0.0;
  double gamma = 0.0;
  double gamma_u1 = 0.0;
  double gamma_u2 = 0.0;
  double objective = 0.0;
  SolveStatus status = SolveStatus::kNumericalFailure;
  double empirical_max_lhs = 0.0;  // NaN when sampling was skipped or failed
  double max_weight_deviation = 0.0;
  std::string message;
  ImplicitNetwork robustified;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct SweepOptions {
  std::string backend = "ipm";
  SolverOptions solver;
  int jobs = 1;
  /// When set, each robustified network is sampled to fill
  /// empirical_max_lhs.
  std::optional<SampleSpec> samples;
  FixedPointConfig fp;
};

/// One synthesis per tolerance with all four weight tolerances equal to it
/// and both input gains pinned at zero. Rows are independent; a failed row
/// records its status and the sweep continues. Throws std::invalid_argument
/// if eps_list is empty or decreasing.
SweepResult sweep_tolerance(const SynthesisProblem& base,
                            const std::vector<double>& eps_list,
                            const SweepOptions& opts = {});

void write_sweep_csv(std::ostream& os, const SweepResult& result,
                     bool timestamp = true);
/// Two columns (eps, gamma) for plotting.
void write_sweep_plot_data(std::ostream& os, const SweepResult& result);

}  // namespace robustify
