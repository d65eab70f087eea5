#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "robustify/conic.hpp"
#include "robustify/mpc.hpp"
#include "robustify/multipliers.hpp"
#include "robustify/network.hpp"
#include "robustify/synthesis.hpp"

namespace robustify::cli {

/// Invalid or unknown configuration entry; `key` is the dotted path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Everything a subcommand may read. Defaults reproduce the built-in
/// "paper-mpc" preset.
struct RunConfig {
  std::string preset = "paper-mpc";
  MpcProblem mpc = MpcProblem::default_preset();

  std::string network;      // network file; empty means the preset MPC policy
  std::string certificate;  // certificate file for verify

  InputPairSet pairset{1.0, 1.0};
  ObjectiveWeights weights{1.0, 1.0, 1.0};
  SimilarityTolerances tolerances;
  std::optional<double> fixed_gamma_u1;
  std::optional<double> fixed_gamma_u2;
  double strictness_shift = 1e-8;
  double t_floor = 1e-6;

  std::vector<double> sweep_eps{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  bool sweep_sample = true;

  int sample_count = 10000;
  std::optional<Eigen::VectorXd> sample_center;  // zeros when unset
  double sample_radius = 5.0;

  Eigen::VectorXd initial_state = Eigen::Vector2d(1.0, -1.0);
  int steps = 30;

  std::uint64_t seed = 0;
  std::string out = ".";
  std::string backend = "ipm";
  int jobs = 1;
  bool timestamp = true;
  SolverOptions solver;
  FixedPointConfig fixed_point;

  RunConfig() { fixed_point.relu_direct = true; }

  void validate() const;
};

/// Applies a JSON document on top of the defaults. Throws ConfigError for
/// unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

}  // namespace robustify::cli
