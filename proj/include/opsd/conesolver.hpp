#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <string>
#include <vector>

namespace opsd::cone {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/**
 * Conic program in the form
 *
 *   minimize    c'x
 *   subject to  A x = b
 *               h - G x in K
 *               lower <= x <= upper
 *
 * where K is the product of a nonnegative orthant (the first num_nonneg rows
 * of G) and second-order cones {(t, u) : ||u|| <= t} taking the remaining rows
 * in order, one block per entry of soc_dims.
 *
 * Bounds may be empty (all variables free) or sized to the variable count with
 * +-infinity for absent sides. Variables with lower == upper are eliminated
 * before the interior-point iteration.
 */
struct StandardConeProblem {
  Eigen::VectorXd c;
  SparseMatrix A;
  Eigen::VectorXd b;
  SparseMatrix G;
  Eigen::VectorXd h;
  int num_nonneg = 0;
  std::vector<int> soc_dims;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  [[nodiscard]] int num_vars() const { return static_cast<int>(c.size()); }
  [[nodiscard]] bool has_bounds() const { return lower.size() > 0 || upper.size() > 0; }

  /// Throws std::invalid_argument naming the first inconsistent dimension.
  void check() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

[[nodiscard]] const char* to_string(SolveStatus status);

/**
 * Result of a cone solve.
 *
 * z holds one multiplier per row of the expanded conic block: the rows of the
 * nonnegative part of G, then one row per finite lower bound, one per finite
 * upper bound (both in variable order), then the SOC rows of G. When status is
 * infeasible, (y, z) is a normalized Farkas certificate with b'y + h'z = -1;
 * when unbounded, x is a normalized improving ray with c'x = -1.
 */
struct ConeSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 200;
  double infeasibility_tol = 1e-8;
  double step_fraction = 0.99;
  double static_regularization = 1e-8;
  int refinement_steps = 6;
  bool verbose = false;
};

/// Primal-dual interior point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
[[nodiscard]] ConeSolution solve(const StandardConeProblem& problem,
                                 const SolverSettings& settings = {});

[[nodiscard]] inline ConeSolution solve(const StandardConeProblem& problem, double tol, int max_iter) {
  SolverSettings settings;
  settings.tol = tol;
  settings.max_iter = max_iter;
  return solve(problem, settings);
}

struct Residuals {
  double primal_norm = 0.0;
  double dual_norm = 0.0;
  double gap = 0.0;
};

/**
 * KKT residuals of (x, y, z) recomputed from the problem data alone.
 *
 * primal_norm = max(|Ax - b|, dist(h - Gx, K)) / (1 + max(|b|, |h|))
 * dual_norm   = max(|c + A'y + G'z|, dist(z, K)) / (1 + |c|)
 * gap         = |c'x + b'y + h'z| / max(1, |c'x|)
 *
 * All norms are infinity norms; bound rows are included in G, h as described
 * for ConeSolution::z.
 */
[[nodiscard]] Residuals residuals(const StandardConeProblem& problem, const ConeSolution& solution);

/// Versioned text dump ("opsd-cone 1"); values are written with round-trip precision.
void write_problem(std::ostream& out, const StandardConeProblem& problem);
[[nodiscard]] StandardConeProblem read_problem(std::istream& in);

}  // namespace opsd::cone
