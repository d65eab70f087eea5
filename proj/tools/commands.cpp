#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "robustify/csv.hpp"
#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"
#include "robustify/network_io.hpp"
#include "robustify/verification.hpp"

namespace robustify::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());
  return fs::path(cfg.out) / name;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  return os;
}

json load_json(const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError("cannot read " + path);
  return read_json_file(path);
}

void save_json(const fs::path& p, const json& j) {
  std::ofstream os = open_out(p);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + p.string());
}

ImplicitNetwork network_for(const RunConfig& cfg) {
  if (cfg.network.empty()) return qp_to_implicit_network(condense_qp(cfg.mpc));
  return network_from_json(load_json(cfg.network));
}

SynthesisProblem problem_for(const RunConfig& cfg, const ImplicitNetwork& net) {
  SynthesisProblem p;
  p.original = net;
  p.pairset = cfg.pairset;
  p.weights = cfg.weights;
  p.tols = cfg.tolerances;
  p.strictness_shift = cfg.strictness_shift;
  p.t_floor = cfg.t_floor;
  p.fixed_gamma_u1 = cfg.fixed_gamma_u1;
  p.fixed_gamma_u2 = cfg.fixed_gamma_u2;
  return p;
}

SampleSpec samples_for(const RunConfig& cfg, int n_u) {
  SampleSpec s;
  s.pairset = cfg.pairset;
  s.count = cfg.sample_count;
  s.seed = cfg.seed;
  s.center = cfg.sample_center ? *cfg.sample_center : Eigen::VectorXd::Zero(n_u);
  if (s.center.size() != n_u) {
    throw ConfigError("samples.center", "size must match the network input");
  }
  s.radius = cfg.sample_radius;
  return s;
}

int status_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return kExitOk;
    case SolveStatus::kInfeasible: return kExitInfeasible;
    case SolveStatus::kNumericalFailure: return kExitNumerical;
  }
  return kExitNumerical;
}

std::string fmt(double v) { return format_double(v); }

json qp_to_json(const CondensedQP& qp) {
  return {{"H", matrix_to_json(qp.H)},   {"F", matrix_to_json(qp.F)},
          {"G", matrix_to_json(qp.G)},   {"S_v", matrix_to_json(qp.S_v)},
          {"c", vector_to_json(qp.c)},   {"state_cost", matrix_to_json(qp.state_cost)}};
}

// Grid over [-5, 5]^2 for planar plants, seeded uniform draws otherwise.
std::vector<Eigen::VectorXd> oracle_points(int nx, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> pts;
  if (nx == 2) {
    for (int i = 0; i < 10; ++i) {
      for (int k = 0; k < 10; ++k) {
        pts.push_back(Eigen::Vector2d(-5.0 + 10.0 * i / 9.0, -5.0 + 10.0 * k / 9.0));
      }
    }
    return pts;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd w(nx);
    for (int k = 0; k < nx; ++k) w(k) = u(rng);
    pts.push_back(w);
  }
  return pts;
}

}  // namespace

int cmd_mpc_build(const RunConfig& cfg, std::ostream& out) {
  const CondensedQP qp = condense_qp(cfg.mpc);
  const ImplicitNetwork net = qp_to_implicit_network(qp);
  save_network(out_path(cfg, "network.json").string(), net);
  save_json(out_path(cfg, "qp.json"), qp_to_json(qp));
  const NetworkDims d = net.dims();
  out << "dims n=" << d.n << " n_u=" << d.n_u << " n_g=" << d.n_g << '\n';
  if (qp.num_inputs() <= 4) {
    for (Eigen::Index i = 0; i < qp.H.rows(); ++i) {
      out << (i == 0 ? "H =" : "   ");
      for (Eigen::Index k = 0; k < qp.H.cols(); ++k) out << ' ' << fmt(qp.H(i, k));
      out << '\n';
    }
  }
  double max_err = 0.0;
  for (const auto& w : oracle_points(cfg.mpc.state_dim(), cfg.seed)) {
    const Eigen::VectorXd v_net = evaluate(net, w, cfg.fixed_point).output;
    const Eigen::VectorXd v_qp = solve_qp_oracle(qp, w).v;
    max_err = std::max(max_err, (v_net - v_qp).lpNorm<Eigen::Infinity>());
  }
  out << "oracle max error " << fmt(max_err) << '\n';
  return max_err <= 1e-5 ? kExitOk : kExitViolation;
}

int cmd_synthesize(const RunConfig& cfg, std::ostream& out) {
  const ImplicitNetwork net = network_for(cfg);
  const SynthesisProblem prob = problem_for(cfg, net);
  auto backend = make_backend(cfg.backend);
  const SynthesisSolution sol = synthesize(prob, *backend, cfg.solver);
  out << "status " << to_string(sol.status);
  if (!sol.message.empty()) out << " (" << sol.message << ")";
  out << '\n';
  if (sol.status != SolveStatus::kOptimal) return status_exit(sol.status);
  save_network(out_path(cfg, "robustified.json").string(), sol.robustified);
  save_json(out_path(cfg, "certificate.json"), certificate_to_json(sol.certificate));
  save_json(out_path(cfg, "solution.json"), solution_to_json(sol, net));
  out << "gamma " << fmt(sol.certificate.gamma) << " gamma_u1 "
      << fmt(sol.certificate.gamma_u1) << " gamma_u2 " << fmt(sol.certificate.gamma_u2)
      << " objective " << fmt(sol.objective_value) << " max_weight_deviation "
      << fmt(sol.max_weight_deviation(net)) << '\n';
  return kExitOk;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  const ImplicitNetwork net = network_for(cfg);
  AnalysisOptions ao;
  ao.t_floor = cfg.t_floor;
  ao.fixed_gamma_u1 = cfg.fixed_gamma_u1;
  ao.fixed_gamma_u2 = cfg.fixed_gamma_u2;
  auto backend = make_backend(cfg.backend);
  const AnalysisResult res = analyze_network(net, cfg.pairset, cfg.weights, *backend, ao, cfg.solver);
  {
    std::ofstream os = open_out(out_path(cfg, "analysis.csv"));
    CsvWriter w(os, cfg.timestamp);
    w.header({"gamma", "gamma_u1", "gamma_u2", "objective", "status"});
    w.cell(res.certificate.gamma).cell(res.certificate.gamma_u1);
    w.cell(res.certificate.gamma_u2).cell(res.objective_value).cell(to_string(res.status));
    w.end_row();
  }
  out << "status " << to_string(res.status);
  if (!res.message.empty()) out << " (" << res.message << ")";
  out << '\n';
  if (res.status != SolveStatus::kOptimal) return status_exit(res.status);
  save_json(out_path(cfg, "analysis_certificate.json"), certificate_to_json(res.certificate));
  out << "gamma " << fmt(res.certificate.gamma) << " gamma_u1 "
      << fmt(res.certificate.gamma_u1) << " gamma_u2 " << fmt(res.certificate.gamma_u2)
      << " objective " << fmt(res.objective_value) << '\n';
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  if (cfg.certificate.empty()) throw ConfigError("certificate", "required by verify");
  const ImplicitNetwork net = network_for(cfg);
  const RobustnessCertificate cert = certificate_from_json(load_json(cfg.certificate));
  CheckOptions co;
  co.jobs = cfg.jobs;
  co.fp = cfg.fixed_point;
  const BoundCheckReport rep =
      empirical_bound_check(net, cert, samples_for(cfg, net.dims().n_u), co);
  {
    std::ofstream os = open_out(out_path(cfg, "verify.csv"));
    CsvWriter w(os, cfg.timestamp);
    w.header({"samples", "violations", "worst_margin", "empirical_gamma_lb", "gamma", "max_lhs"});
    w.cell(rep.samples).cell(rep.violations).cell(rep.worst_margin);
    w.cell(rep.empirical_gamma_lb).cell(cert.gamma).cell(rep.max_lhs);
    w.end_row();
  }
  out << "samples " << rep.samples << " violations " << rep.violations
      << " worst_margin " << fmt(rep.worst_margin) << " empirical_gamma_lb "
      << fmt(rep.empirical_gamma_lb) << " gamma " << fmt(cert.gamma) << '\n';
  if (rep.violations > 0) {
    const fs::path p = out_path(cfg, "counterexamples.json");
    write_counterexamples_json(p.string(), net, cert, rep);
    out << "counterexamples written to " << p.string() << '\n';
    return kExitViolation;
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const ImplicitNetwork net = network_for(cfg);
  SweepOptions so;
  so.backend = cfg.backend;
  so.solver = cfg.solver;
  so.jobs = cfg.jobs;
  so.fp = cfg.fixed_point;
  if (cfg.sweep_sample) so.samples = samples_for(cfg, net.dims().n_u);
  const SweepResult res = sweep_tolerance(problem_for(cfg, net), cfg.sweep_eps, so);
  {
    std::ofstream os = open_out(out_path(cfg, "sweep.csv"));
    write_sweep_csv(os, res, cfg.timestamp);
  }
  {
    std::ofstream os = open_out(out_path(cfg, "sweep.dat"));
    write_sweep_plot_data(os, res);
  }
  for (const auto& r : res.rows) {
    out << "eps " << fmt(r.eps) << " gamma " << fmt(r.gamma) << " status "
        << to_string(r.status);
    if (!r.message.empty()) out << " (" << r.message << ")";
    out << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const CondensedQP qp = condense_qp(cfg.mpc);
  const ImplicitNetwork net = network_for(cfg);
  const Trajectory t_net =
      simulate_closed_loop(cfg.mpc, NetworkPolicy{net, cfg.fixed_point}, cfg.initial_state, cfg.steps);
  const Trajectory t_qp =
      simulate_closed_loop(cfg.mpc, QpPolicy{qp, {}}, cfg.initial_state, cfg.steps);
  {
    std::ofstream os = open_out(out_path(cfg, "trajectory_network.csv"));
    write_trajectory_csv(os, t_net, cfg.timestamp);
  }
  {
    std::ofstream os = open_out(out_path(cfg, "trajectory_oracle.csv"));
    write_trajectory_csv(os, t_qp, cfg.timestamp);
  }
  out << "max trajectory deviation " << fmt(trajectory_deviation(t_net, t_qp)) << '\n';
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robustness certification and synthesis for implicit networks"};
  app.require_subcommand(1);
  std::string config_path, out_dir, backend;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool no_timestamp = false;
  app.add_option("--config", config_path, "JSON configuration file");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "sampling seed");
  auto* backend_opt = app.add_option("--backend", backend, "conic backend name");
  auto* jobs_opt = app.add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp line in CSV output");

  using Command = int (*)(const RunConfig&, std::ostream&);
  struct Entry {
    const char* name;
    const char* help;
    Command fn;
  };
  const std::vector<Entry> commands = {
      {"mpc-build", "write the MPC policy network and condensed QP", cmd_mpc_build},
      {"synthesize", "robustify a network within weight tolerances", cmd_synthesize},
      {"analyze", "certify a network without changing its weights", cmd_analyze},
      {"verify", "check a certificate by sampling input pairs", cmd_verify},
      {"sweep", "synthesize over a grid of tolerances", cmd_sweep},
      {"simulate", "closed-loop rollout of network and QP policies", cmd_simulate}};
  std::vector<CLI::App*> subs;
  for (const Entry& c : commands) {
    subs.push_back(app.add_subcommand(c.name, c.help)->fallthrough());
  }

  std::vector<const char*> argv{"robustify_cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : config_from_json(load_json(config_path));
    if (*out_opt) cfg.out = out_dir;
    if (*seed_opt) cfg.seed = seed;
    if (*backend_opt) cfg.backend = backend;
    if (*jobs_opt) cfg.jobs = jobs;
    if (no_timestamp) cfg.timestamp = false;
    const auto names = backend_names();
    if (std::find(names.begin(), names.end(), cfg.backend) == names.end()) {
      throw ConfigError("backend", "unknown backend '" + cfg.backend + "'");
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].fn(cfg, out);
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace robustify::cli
