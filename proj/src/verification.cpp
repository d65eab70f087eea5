#include "robustify/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "robustify/csv.hpp"
#include "robustify/errors.hpp"
#include "robustify/json_eigen.hpp"
#include "robustify/network_io.hpp"

namespace robustify {

namespace {

// Runs fn(i) for i in [0, count) on up to `jobs` threads; the first
// exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

void SampleSpec::validate() const {
  pairset.validate();
  if (count < 1) throw std::invalid_argument("sample count must be at least 1");
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("sample box radius must be finite and >= 0");
  }
  if (!center.allFinite()) throw std::invalid_argument("sample box center is not finite");
}

std::vector<InputPair> sample_input_pairs(const SampleSpec& spec) {
  spec.validate();
  const Eigen::Index n_u = spec.center.size();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<InputPair> pairs;
  pairs.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    Eigen::VectorXd u1(n_u), d(n_u);
    for (Eigen::Index k = 0; k < n_u; ++k) {
      u1(k) = spec.center(k) + spec.radius * (2.0 * unit(rng) - 1.0);
    }
    for (Eigen::Index k = 0; k < n_u; ++k) d(k) = normal(rng);
    const double frac = i % 2 == 0 ? 0.95 + 0.05 * unit(rng)
                                   : std::pow(unit(rng), 1.0 / 5.0);
    Eigen::VectorXd du = Eigen::VectorXd::Zero(n_u);
    const double dn = d.norm();
    if (n_u > 0 && dn > 0.0) {
      d /= dn;
      const double r_max = std::min(spec.pairset.eps_u1 / d.lpNorm<1>(),
                                    std::sqrt(spec.pairset.eps_u2));
      du = frac * r_max * d;
    }
    Eigen::VectorXd u2 = u1 + du;
    // Rounding can leave the pair a hair outside the set.
    while (!spec.pairset.contains(u1, u2)) {
      du *= 1.0 - 1e-12;
      u2 = u1 + du;
    }
    pairs.emplace_back(std::move(u1), std::move(u2));
  }
  return pairs;
}

BoundCheckReport empirical_bound_check(const ImplicitNetwork& net,
                                       const RobustnessCertificate& cert,
                                       const SampleSpec& spec,
                                       const CheckOptions& opts) {
  net.validate();
  if (spec.center.size() != net.dims().n_u) {
    throw DimensionMismatch("sample box center has " +
                            std::to_string(spec.center.size()) +
                            " entries, network takes " +
                            std::to_string(net.dims().n_u));
  }
  const auto pairs = sample_input_pairs(spec);
  const int count = static_cast<int>(pairs.size());
  std::vector<double> lhs(count), rhs(count), gain(count);
  parallel_for(count, opts.jobs, [&](int i) {
    const auto& [u1, u2] = pairs[i];
    const Eigen::VectorXd du = u1 - u2;
    const Eigen::VectorXd f1 = evaluate(net, u1, opts.fp).output;
    const Eigen::VectorXd f2 = evaluate(net, u2, opts.fp).output;
    lhs[i] = (f1 - f2).lpNorm<1>();
    rhs[i] = cert.bound(du);
    gain[i] = cert.gamma_u1 * du.lpNorm<1>() + cert.gamma_u2 * du.squaredNorm();
  });

  BoundCheckReport rep;
  rep.samples = count;
  rep.worst_margin = -std::numeric_limits<double>::infinity();
  // u1 = u2 always lies in the set, so gamma >= 0 holds without sampling.
  rep.empirical_gamma_lb = 0.0;
  for (int i = 0; i < count; ++i) {
    const double margin = lhs[i] - rhs[i];
    rep.worst_margin = std::max(rep.worst_margin, margin);
    rep.empirical_gamma_lb = std::max(rep.empirical_gamma_lb, lhs[i] - gain[i]);
    rep.max_lhs = std::max(rep.max_lhs, lhs[i]);
    if (margin > opts.tolerance) {
      ++rep.violations;
      if (static_cast<int>(rep.counterexamples.size()) < opts.max_counterexamples) {
        rep.counterexamples.push_back({pairs[i].first, pairs[i].second, lhs[i], rhs[i]});
      }
    }
  }
  return rep;
}

void write_counterexamples_json(const std::string& path,
                                const ImplicitNetwork& net,
                                const RobustnessCertificate& cert,
                                const BoundCheckReport& report) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : report.counterexamples) {
    cases.push_back({{"u1", vector_to_json(c.u1)},
                     {"u2", vector_to_json(c.u2)},
                     {"lhs", c.lhs},
                     {"rhs", c.rhs}});
  }
  write_json_file(path, {{"network", network_to_json(net)},
                         {"certificate", certificate_to_json(cert)},
                         {"violations", report.violations},
                         {"counterexamples", cases}});
}

LemmaReport lemma_property_suite(const ImplicitNetwork& net,
                                 const MultiplierSet& m,
                                 const SampleSpec& spec,
                                 const FixedPointConfig& fp) {
  net.validate();
  const Dims dims(net.dims());
  if (spec.center.size() != dims.n_u) {
    throw DimensionMismatch("sample box center does not match the network input");
  }
  const auto omega_z = build_omega_z(m.T_z, net.state_weights, net.input_weights, dims);
  const auto omega_u = build_omega_u(m.T_u1, m.T_u2, spec.pairset, dims);
  const auto omega_g = build_omega_g(m.T_g, net.output_state_weights,
                                     net.output_input_weights, dims);
  LemmaReport rep;
  rep.min_s_z = rep.min_s_u = rep.min_s_g = std::numeric_limits<double>::infinity();
  rep.min_scaled_s_z = rep.min_scaled_s_u = rep.min_scaled_s_g = rep.min_s_z;
  for (const auto& [u1, u2] : sample_input_pairs(spec)) {
    const Eigen::VectorXd p = assemble_p(net, u1, u2, fp).flat;
    const double scale = 1.0 + p.squaredNorm();
    const double sz = omega_z.value(p), su = omega_u.value(p), sg = omega_g.value(p);
    rep.min_s_z = std::min(rep.min_s_z, sz);
    rep.min_s_u = std::min(rep.min_s_u, su);
    rep.min_s_g = std::min(rep.min_s_g, sg);
    rep.min_scaled_s_z = std::min(rep.min_scaled_s_z, sz / scale);
    rep.min_scaled_s_u = std::min(rep.min_scaled_s_u, su / scale);
    rep.min_scaled_s_g = std::min(rep.min_scaled_s_g, sg / scale);
    ++rep.samples;
  }
  return rep;
}

SweepResult sweep_tolerance(const SynthesisProblem& base,
                            const std::vector<double>& eps_list,
                            const SweepOptions& opts) {
  if (eps_list.empty()) throw std::invalid_argument("tolerance list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 0.0) || !std::isfinite(eps_list[i])) {
      throw std::invalid_argument("tolerances must be finite and >= 0");
    }
    if (i > 0 && eps_list[i] < eps_list[i - 1]) {
      throw std::invalid_argument("tolerance list must be nondecreasing");
    }
  }
  base.validate();
  SweepResult result;
  result.rows.resize(eps_list.size());
  parallel_for(static_cast<int>(eps_list.size()), opts.jobs, [&](int i) {
    SweepRow& row = result.rows[i];
    row.eps = eps_list[i];
    SynthesisProblem prob = base;
    prob.tols = SimilarityTolerances::uniform(row.eps);
    prob = fix_gains_mode(prob, 0.0, 0.0);
    auto backend = make_backend(opts.backend);
    const SynthesisSolution sol = synthesize(prob, *backend, opts.solver);
    row.status = sol.status;
    row.message = sol.message;
    row.gamma = sol.certificate.gamma;
    row.gamma_u1 = sol.certificate.gamma_u1;
    row.gamma_u2 = sol.certificate.gamma_u2;
    row.objective = sol.objective_value;
    row.empirical_max_lhs = std::numeric_limits<double>::quiet_NaN();
    row.max_weight_deviation = std::numeric_limits<double>::quiet_NaN();
    if (sol.status != SolveStatus::kOptimal) return;
    row.robustified = sol.robustified;
    row.max_weight_deviation = sol.max_weight_deviation(base.original);
    if (opts.samples) {
      try {
        CheckOptions co;
        co.fp = opts.fp;
        row.empirical_max_lhs =
            empirical_bound_check(sol.robustified, sol.certificate, *opts.samples, co).max_lhs;
      } catch (const NonConvergence& e) {
        row.message = std::string("sampling failed: ") + e.what();
      }
    }
  });
  return result;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result, bool timestamp) {
  CsvWriter w(os, timestamp);
  w.header({"eps", "gamma", "gamma_u1", "gamma_u2", "objective", "status",
            "empirical_max_lhs", "max_weight_deviation"});
  for (const auto& r : result.rows) {
    w.cell(r.eps).cell(r.gamma).cell(r.gamma_u1).cell(r.gamma_u2).cell(r.objective);
    w.cell(to_string(r.status)).cell(r.empirical_max_lhs).cell(r.max_weight_deviation);
    w.end_row();
  }
}

void write_sweep_plot_data(std::ostream& os, const SweepResult& result) {
  os << "# eps gamma\n";
  for (const auto& r : result.rows) {
    if (r.status != SolveStatus::kOptimal) continue;
    os << format_double(r.eps) << ' ' << format_double(r.gamma) << '\n';
  }
}

}  // namespace robustify
