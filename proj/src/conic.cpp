#include "robustify/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "robustify/errors.hpp"

namespace robustify {

void SparseSymMatrix::add(int i, int j, double v) {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_) {
    throw DimensionMismatch("symmetric entry (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") outside dimension " +
                            std::to_string(dim_));
  }
  if (i > j) std::swap(i, j);
  entries_.push_back({i, j, v});
}

Eigen::MatrixXd SparseSymMatrix::dense() const {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(dim_, dim_);
  add_to(X);
  return X;
}

void SparseSymMatrix::add_to(Eigen::MatrixXd& X, double scale) const {
  for (const Entry& e : entries_) {
    X(e.row, e.col) += scale * e.value;
    if (e.row != e.col) X(e.col, e.row) += scale * e.value;
  }
}

double SparseSymMatrix::inner(const Eigen::MatrixXd& X) const {
  double s = 0.0;
  for (const Entry& e : entries_) {
    s += e.row == e.col ? e.value * X(e.row, e.row)
                        : e.value * (X(e.row, e.col) + X(e.col, e.row));
  }
  return s;
}

void SparseSymMatrix::compress() {
  std::map<std::pair<int, int>, double> acc;
  for (const Entry& e : entries_) acc[{e.row, e.col}] += e.value;
  entries_.clear();
  for (const auto& [pos, v] : acc) {
    if (v != 0.0) entries_.push_back({pos.first, pos.second, v});
  }
}

void PsdConstraint::add(int var, int i, int j, double v) {
  if (var < 0) throw DimensionMismatch("negative variable index");
  if (static_cast<std::size_t>(var) >= slot_of_var_.size()) {
    slot_of_var_.resize(static_cast<std::size_t>(var) + 1, -1);
  }
  int& slot = slot_of_var_[static_cast<std::size_t>(var)];
  if (slot < 0) {
    slot = static_cast<int>(terms.size());
    terms.emplace_back(var, SparseSymMatrix(dim));
  }
  terms[static_cast<std::size_t>(slot)].second.add(i, j, v);
}

Eigen::MatrixXd PsdConstraint::evaluate(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd X = constant.dense();
  for (const auto& [var, F] : terms) F.add_to(X, theta(var));
  return X;
}

void PsdConstraint::compress() {
  constant.compress();
  std::map<int, SparseSymMatrix> merged;
  for (auto& [var, F] : terms) {
    auto it = merged.try_emplace(var, SparseSymMatrix(dim)).first;
    for (const auto& e : F.entries()) it->second.add(e.row, e.col, e.value);
  }
  terms.clear();
  slot_of_var_.clear();
  for (auto& [var, F] : merged) {
    F.compress();
    if (F.empty()) continue;
    if (static_cast<std::size_t>(var) >= slot_of_var_.size()) {
      slot_of_var_.resize(static_cast<std::size_t>(var) + 1, -1);
    }
    slot_of_var_[static_cast<std::size_t>(var)] = static_cast<int>(terms.size());
    terms.emplace_back(var, std::move(F));
  }
}

double LinearRow::dot(const Eigen::VectorXd& theta) const {
  double s = 0.0;
  for (const auto& [j, a] : coeffs) s += a * theta(j);
  return s;
}

void ConicProgram::validate() const {
  if (num_vars < 0) throw DimensionMismatch("negative variable count");
  if (objective.size() != num_vars) {
    throw DimensionMismatch("objective has " + std::to_string(objective.size()) +
                            " entries for " + std::to_string(num_vars) +
                            " variables");
  }
  auto check_rows = [&](const std::vector<LinearRow>& rows, const char* what) {
    for (const auto& r : rows) {
      for (const auto& [j, a] : r.coeffs) {
        if (j < 0 || j >= num_vars) {
          throw DimensionMismatch(std::string(what) +
                                  " references variable " + std::to_string(j));
        }
        if (!std::isfinite(a)) {
          throw std::invalid_argument(std::string(what) +
                                      " has a non-finite coefficient");
        }
      }
      if (!std::isfinite(r.rhs)) {
        throw std::invalid_argument(std::string(what) +
                                    " has a non-finite right-hand side");
      }
    }
  };
  check_rows(equalities, "equality");
  check_rows(inequalities, "inequality");
  for (const auto& blk : psd_blocks) {
    if (blk.constant.dim() != blk.dim) {
      throw DimensionMismatch("PSD constant term size differs from block");
    }
    for (const auto& [var, F] : blk.terms) {
      if (var < 0 || var >= num_vars) {
        throw DimensionMismatch("PSD block references variable " +
                                std::to_string(var));
      }
      if (F.dim() != blk.dim) {
        throw DimensionMismatch("PSD coefficient size differs from block");
      }
    }
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "Optimal";
    case SolveStatus::kInfeasible: return "Infeasible";
    case SolveStatus::kNumericalFailure: return "NumericalFailure";
  }
  return "unknown";
}

FeasibilityReport verify_solution(const ConicProgram& prog,
                                  const Eigen::VectorXd& theta) {
  if (theta.size() != prog.num_vars) {
    throw DimensionMismatch("candidate point has wrong size");
  }
  FeasibilityReport rep;
  for (const auto& r : prog.inequalities) {
    rep.max_ineq_violation =
        std::max(rep.max_ineq_violation, r.dot(theta) - r.rhs);
  }
  for (const auto& r : prog.equalities) {
    rep.max_eq_violation =
        std::max(rep.max_eq_violation, std::abs(r.dot(theta) - r.rhs));
  }
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& blk : prog.psd_blocks) {
    const Eigen::MatrixXd X = blk.evaluate(theta);
    double lo = std::numeric_limits<double>::infinity();
    if (blk.dim > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
      lo = es.eigenvalues()(0);
    }
    rep.block_min_eigenvalues.push_back(lo);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, lo);
  }
  return rep;
}

namespace {

struct Registry {
  std::mutex mu;
  std::map<std::string, BackendFactory> factories;

  Registry() {
    factories["ipm"] = [] { return std::make_unique<InteriorPointSolver>(); };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_backend(const std::string& name, BackendFactory factory) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<ConicBackend> make_backend(const std::string& name) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  auto it = r.factories.find(name);
  if (it == r.factories.end()) {
    throw std::invalid_argument("unknown conic backend '" + name + "'");
  }
  return it->second();
}

std::vector<std::string> backend_names() {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  std::vector<std::string> names;
  for (const auto& [k, v] : r.factories) names.push_back(k);
  return names;
}

SolverResult solve_conic(const ConicProgram& prog, const SolverOptions& opts,
                         const std::string& backend) {
  return make_backend(backend)->solve(prog, opts);
}

}  // namespace robustify
