#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace robustify {

/// Symmetric matrix held as upper-triangle triplets (row <= col). Adding to
/// an existing position accumulates.
class SparseSymMatrix {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  SparseSymMatrix() = default;
  explicit SparseSymMatrix(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  /// (i, j) and (j, i) are the same entry.
  void add(int i, int j, double v);
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  Eigen::MatrixXd dense() const;
  /// <this, X> = trace(this * X) for symmetric X.
  double inner(const Eigen::MatrixXd& X) const;
  /// Adds scale * this to the symmetric dense matrix X.
  void add_to(Eigen::MatrixXd& X, double scale = 1.0) const;

  /// Merges duplicate positions and drops exact zeros.
  void compress();

 private:
  int dim_ = 0;
  std::vector<Entry> entries_;
};

/// Affine matrix map theta -> F0 + sum_i theta_i F_i required to be PSD.
struct PsdConstraint {
  int dim = 0;
  SparseSymMatrix constant;
  std::vector<std::pair<int, SparseSymMatrix>> terms;  // (variable, F_i)

  explicit PsdConstraint(int d = 0) : dim(d), constant(d) {}

  /// Accumulates v into coefficient matrix of `var` at (i, j).
  void add(int var, int i, int j, double v);
  void add_constant(int i, int j, double v) { constant.add(i, j, v); }
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& theta) const;
  void compress();

 private:
  std::vector<int> slot_of_var_;
};

/// Sparse row coeff' theta with right-hand side.
struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;

  double dot(const Eigen::VectorXd& theta) const;
};

/// minimize c' theta subject to
///   equalities:   row' theta == rhs
///   inequalities: row' theta <= rhs
///   psd_blocks:   F0 + sum theta_i F_i is positive semidefinite.
struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  std::vector<PsdConstraint> psd_blocks;

  /// Throws DimensionMismatch on out-of-range indices or sizes.
  void validate() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kNumericalFailure };

std::string to_string(SolveStatus s);

struct SolverOptions {
  double feas_tol = 1e-8;   // relative primal and dual residuals
  double gap_tol = 1e-8;    // relative duality gap
  double infeas_tol = 1e-8; // certificate residual for infeasibility
  int max_iters = 200;
  /// When the solver breaks down or stalls, the best iterate is still
  /// reported optimal if its residuals are within this multiple of the
  /// tolerances. Set to 1 to disable.
  double relaxed_factor = 100.0;
  /// Solve the Newton system in long double once the iterate is within a
  /// few orders of magnitude of the tolerances.
  bool extended_precision = true;
  int verbosity = 0;
  std::ostream* log = nullptr;  // defaults to std::clog when verbosity > 0
};

struct SolverResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd theta;
  double objective_value = 0.0;
  double dual_objective = 0.0;
  /// Most negative eigenvalue over the PSD blocks, clipped at zero from
  /// above; feasible points have min_eigenvalue >= -feas_tol.
  double min_eigenvalue = 0.0;
  double ineq_violation = 0.0;
  double eq_violation = 0.0;
  // Relative residuals of the reported iterate, as used for termination.
  double rel_primal_residual = 0.0;
  double rel_dual_residual = 0.0;
  double rel_gap = 0.0;
  int iterations = 0;
  std::string message;
};

/// Residuals recomputed from scratch for a candidate point.
struct FeasibilityReport {
  double max_ineq_violation = 0.0;  // max(0, row' theta - rhs)
  double max_eq_violation = 0.0;    // max |row' theta - rhs|
  std::vector<double> block_min_eigenvalues;
  double min_eigenvalue = 0.0;      // min over blocks, +inf without blocks

  bool feasible(double tol) const {
    return max_ineq_violation <= tol && max_eq_violation <= tol &&
           min_eigenvalue >= -tol;
  }
};

FeasibilityReport verify_solution(const ConicProgram& prog,
                                  const Eigen::VectorXd& theta);

/// Solver adapter. A backend instance is one session: it is not shared
/// between concurrent solves.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual std::string name() const = 0;
  virtual SolverResult solve(const ConicProgram& prog,
                             const SolverOptions& opts) = 0;
};

using BackendFactory = std::function<std::unique_ptr<ConicBackend>()>;

/// The bundled interior-point solver is registered as "ipm".
void register_backend(const std::string& name, BackendFactory factory);
/// Throws std::invalid_argument for unknown names.
std::unique_ptr<ConicBackend> make_backend(const std::string& name);
std::vector<std::string> backend_names();

/// Primal-dual interior point with Nesterov-Todd scaling and Mehrotra
/// predictor-corrector steps. Dense linear algebra; equality constraints are
/// eliminated by a null-space basis.
class InteriorPointSolver : public ConicBackend {
 public:
  std::string name() const override { return "ipm"; }
  SolverResult solve(const ConicProgram& prog,
                     const SolverOptions& opts) override;
};

/// Convenience: one-shot solve with a fresh session of `backend`.
SolverResult solve_conic(const ConicProgram& prog,
                         const SolverOptions& opts = {},
                         const std::string& backend = "ipm");

}  // namespace robustify
