#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"

namespace robustify::cli {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const json& j, const std::string& key) {
  if (!j.is_object()) throw ConfigError(key, "expected an object");
}

void reject_unknown(const json& j, const std::string& prefix,
                    const std::set<std::string>& allowed) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(join(prefix, k), "unknown key");
  }
}

double get_double(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(key, "expected an integer");
  return j.get<int>();
}

bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(key, "expected a string");
  return j.get<std::string>();
}

Eigen::MatrixXd get_matrix(const json& j, const std::string& key) {
  try {
    return matrix_from_json(j, key);
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

Eigen::VectorXd get_vector(const json& j, const std::string& key) {
  try {
    return vector_from_json(j, key);
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void parse_mpc(const json& j, MpcProblem* m) {
  require_object(j, "mpc");
  reject_unknown(j, "mpc", {"A", "B", "Q", "R", "P", "horizon", "input_bound"});
  if (j.contains("A")) m->A = get_matrix(j["A"], "mpc.A");
  if (j.contains("B")) m->B = get_matrix(j["B"], "mpc.B");
  if (j.contains("Q")) m->Q = get_matrix(j["Q"], "mpc.Q");
  if (j.contains("R")) m->R = get_matrix(j["R"], "mpc.R");
  if (j.contains("P")) m->P = get_matrix(j["P"], "mpc.P");
  if (j.contains("horizon")) m->N = get_int(j["horizon"], "mpc.horizon");
  if (j.contains("input_bound")) m->v_bound = get_double(j["input_bound"], "mpc.input_bound");
}

void parse_solver(const json& j, SolverOptions* s) {
  require_object(j, "solver");
  reject_unknown(j, "solver", {"feas_tol", "gap_tol", "infeas_tol", "max_iters",
                               "relaxed_factor", "verbosity"});
  if (j.contains("feas_tol")) s->feas_tol = get_double(j["feas_tol"], "solver.feas_tol");
  if (j.contains("gap_tol")) s->gap_tol = get_double(j["gap_tol"], "solver.gap_tol");
  if (j.contains("infeas_tol")) s->infeas_tol = get_double(j["infeas_tol"], "solver.infeas_tol");
  if (j.contains("max_iters")) s->max_iters = get_int(j["max_iters"], "solver.max_iters");
  if (j.contains("relaxed_factor")) {
    s->relaxed_factor = get_double(j["relaxed_factor"], "solver.relaxed_factor");
  }
  if (j.contains("verbosity")) s->verbosity = get_int(j["verbosity"], "solver.verbosity");
}

void parse_fixed_point(const json& j, FixedPointConfig* f) {
  require_object(j, "fixed_point");
  reject_unknown(j, "fixed_point", {"damping", "tol", "max_iters", "anderson_depth",
                                    "relu_direct", "relu_fallback"});
  if (j.contains("damping")) f->damping = get_double(j["damping"], "fixed_point.damping");
  if (j.contains("tol")) f->tol = get_double(j["tol"], "fixed_point.tol");
  if (j.contains("max_iters")) f->max_iters = get_int(j["max_iters"], "fixed_point.max_iters");
  if (j.contains("anderson_depth")) {
    f->anderson_depth = get_int(j["anderson_depth"], "fixed_point.anderson_depth");
  }
  if (j.contains("relu_direct")) f->relu_direct = get_bool(j["relu_direct"], "fixed_point.relu_direct");
  if (j.contains("relu_fallback")) {
    f->relu_fallback = get_bool(j["relu_fallback"], "fixed_point.relu_fallback");
  }
}

std::optional<double> get_optional(const json& j, const std::string& key) {
  if (j.is_null()) return std::nullopt;
  return get_double(j, key);
}

// Runs a validate() and reports failures against `key`.
template <class Fn>
void check(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  check("mpc", [&] { mpc.validate(); });
  check("pairset", [&] { pairset.validate(); });
  check("weights", [&] { weights.validate(); });
  check("tolerances", [&] { tolerances.validate(); });
  check("solver", [&] {
    if (!(solver.feas_tol > 0 && solver.gap_tol > 0 && solver.infeas_tol > 0)) {
      throw std::invalid_argument("tolerances must be positive");
    }
    if (solver.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(solver.relaxed_factor >= 1.0)) {
      throw std::invalid_argument("relaxed_factor must be >= 1");
    }
  });
  check("fixed_point", [&] { fixed_point.validate(); });
  if (!(strictness_shift > 0.0)) throw ConfigError("strictness_shift", "must be positive");
  if (!(t_floor > 0.0)) throw ConfigError("t_floor", "must be positive");
  if (sweep_eps.empty()) throw ConfigError("sweep.eps", "must not be empty");
  for (std::size_t i = 0; i < sweep_eps.size(); ++i) {
    if (!(sweep_eps[i] >= 0.0) || !std::isfinite(sweep_eps[i])) {
      throw ConfigError("sweep.eps", "entries must be finite and >= 0");
    }
    if (i > 0 && sweep_eps[i] < sweep_eps[i - 1]) {
      throw ConfigError("sweep.eps", "entries must be nondecreasing");
    }
  }
  if (sample_count < 1) throw ConfigError("samples.count", "must be >= 1");
  if (!(sample_radius >= 0.0)) throw ConfigError("samples.radius", "must be >= 0");
  if (steps < 1) throw ConfigError("simulate.steps", "must be >= 1");
  if (initial_state.size() != mpc.state_dim()) {
    throw ConfigError("simulate.initial_state", "size must match the plant state");
  }
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  if (fixed_gamma_u1 && !(*fixed_gamma_u1 >= 0.0)) {
    throw ConfigError("fixed_gamma_u1", "must be >= 0");
  }
  if (fixed_gamma_u2 && !(*fixed_gamma_u2 >= 0.0)) {
    throw ConfigError("fixed_gamma_u2", "must be >= 0");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  require_object(j, "<root>");
  reject_unknown(j, "", {"preset", "mpc", "network", "certificate", "pairset",
                         "weights", "tolerances", "fixed_gamma_u1", "fixed_gamma_u2",
                         "strictness_shift", "t_floor", "sweep", "samples",
                         "simulate", "seed", "out", "backend", "jobs", "timestamp",
                         "solver", "fixed_point"});
  if (j.contains("preset")) {
    c.preset = get_string(j["preset"], "preset");
    if (c.preset != "paper-mpc") throw ConfigError("preset", "unknown preset '" + c.preset + "'");
  }
  if (j.contains("mpc")) parse_mpc(j["mpc"], &c.mpc);
  if (j.contains("network")) c.network = get_string(j["network"], "network");
  if (j.contains("certificate")) c.certificate = get_string(j["certificate"], "certificate");
  if (j.contains("pairset")) {
    const json& p = j["pairset"];
    require_object(p, "pairset");
    reject_unknown(p, "pairset", {"eps_u1", "eps_u2"});
    if (p.contains("eps_u1")) c.pairset.eps_u1 = get_double(p["eps_u1"], "pairset.eps_u1");
    if (p.contains("eps_u2")) c.pairset.eps_u2 = get_double(p["eps_u2"], "pairset.eps_u2");
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    require_object(w, "weights");
    reject_unknown(w, "weights", {"w0", "w1", "w2"});
    if (w.contains("w0")) c.weights.w0 = get_double(w["w0"], "weights.w0");
    if (w.contains("w1")) c.weights.w1 = get_double(w["w1"], "weights.w1");
    if (w.contains("w2")) c.weights.w2 = get_double(w["w2"], "weights.w2");
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (t.is_number()) {
      c.tolerances = SimilarityTolerances::uniform(t.get<double>());
    } else {
      require_object(t, "tolerances");
      reject_unknown(t, "tolerances", {"eps_Wx", "eps_Wu", "eps_Wfx", "eps_Wfu"});
      if (t.contains("eps_Wx")) c.tolerances.eps_Wx = get_double(t["eps_Wx"], "tolerances.eps_Wx");
      if (t.contains("eps_Wu")) c.tolerances.eps_Wu = get_double(t["eps_Wu"], "tolerances.eps_Wu");
      if (t.contains("eps_Wfx")) c.tolerances.eps_Wfx = get_double(t["eps_Wfx"], "tolerances.eps_Wfx");
      if (t.contains("eps_Wfu")) c.tolerances.eps_Wfu = get_double(t["eps_Wfu"], "tolerances.eps_Wfu");
    }
  }
  if (j.contains("fixed_gamma_u1")) c.fixed_gamma_u1 = get_optional(j["fixed_gamma_u1"], "fixed_gamma_u1");
  if (j.contains("fixed_gamma_u2")) c.fixed_gamma_u2 = get_optional(j["fixed_gamma_u2"], "fixed_gamma_u2");
  if (j.contains("strictness_shift")) c.strictness_shift = get_double(j["strictness_shift"], "strictness_shift");
  if (j.contains("t_floor")) c.t_floor = get_double(j["t_floor"], "t_floor");
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    require_object(s, "sweep");
    reject_unknown(s, "sweep", {"eps", "sample"});
    if (s.contains("eps")) {
      const Eigen::VectorXd e = get_vector(s["eps"], "sweep.eps");
      c.sweep_eps.assign(e.data(), e.data() + e.size());
    }
    if (s.contains("sample")) c.sweep_sample = get_bool(s["sample"], "sweep.sample");
  }
  if (j.contains("samples")) {
    const json& s = j["samples"];
    require_object(s, "samples");
    reject_unknown(s, "samples", {"count", "center", "radius"});
    if (s.contains("count")) c.sample_count = get_int(s["count"], "samples.count");
    if (s.contains("center")) c.sample_center = get_vector(s["center"], "samples.center");
    if (s.contains("radius")) c.sample_radius = get_double(s["radius"], "samples.radius");
  }
  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    require_object(s, "simulate");
    reject_unknown(s, "simulate", {"initial_state", "steps"});
    if (s.contains("initial_state")) {
      c.initial_state = get_vector(s["initial_state"], "simulate.initial_state");
    }
    if (s.contains("steps")) c.steps = get_int(s["steps"], "simulate.steps");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("out")) c.out = get_string(j["out"], "out");
  if (j.contains("backend")) c.backend = get_string(j["backend"], "backend");
  if (j.contains("jobs")) c.jobs = get_int(j["jobs"], "jobs");
  if (j.contains("timestamp")) c.timestamp = get_bool(j["timestamp"], "timestamp");
  if (j.contains("solver")) parse_solver(j["solver"], &c.solver);
  if (j.contains("fixed_point")) parse_fixed_point(j["fixed_point"], &c.fixed_point);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  // read_json_file reports I/O problems as runtime_error and parse problems
  // as SchemaError; both pass through unchanged.
  return config_from_json(read_json_file(path));
}

}  // namespace robustify::cli
