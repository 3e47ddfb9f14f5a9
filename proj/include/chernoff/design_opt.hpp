#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <vector>

#include "chernoff/core.hpp"

namespace chernoff {

/// Squared mean gaps for verifying one hypothesis: rows are the J-1
/// alternatives, columns the arms.
struct LpInstance {
  Eigen::MatrixXd gaps_sq;

  /// gaps_sq(k, i) = (mu_i(hyp) - mu_i(alt_k))^2 over alternatives alt_k != hyp.
  static LpInstance verification(const MeansTable& means, HypIndex hyp);

  std::size_t arm_count() const { return static_cast<std::size_t>(gaps_sq.cols()); }
  std::size_t row_count() const { return static_cast<std::size_t>(gaps_sq.rows()); }

  /// min over rows of gaps_sq * p.
  double objective(const std::vector<double>& p) const;
  void validate() const;
};

/// Gradients of the arm means at a parameter estimate, one row per arm.
struct EigInstance {
  Eigen::MatrixXd grads;

  std::size_t arm_count() const { return static_cast<std::size_t>(grads.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(grads.cols()); }
  bool spanning() const;

  /// sum_i p_i g_i g_i^T
  Eigen::MatrixXd information(const std::vector<double>& p) const;
  /// Smallest eigenvalue of the information matrix.
  double objective(const std::vector<double>& p) const;
  void validate() const;
};

struct DesignSolution {
  Design design;
  double objective = 0.0;
  int iters = 0;
  bool converged = false;
  /// Upper bound on the optimum minus `objective` (dual certificate).
  double duality_gap = 0.0;
  bool degenerate = false;    // LP with a zero optimum
  bool non_spanning = false;  // eigen instance whose gradients do not span
  /// Smoothed objective after every Frank-Wolfe step (eigen solver only).
  std::vector<double> trace;
};

/// Exact max-min verification LP by dense simplex on the epigraph form.
DesignSolution solve_verification_lp(const LpInstance& inst);

struct EigSolverOptions {
  int max_iters = 500;
  double tol = 1e-8;
  /// Start Frank-Wolfe from this design instead of uniform.
  std::optional<Design> warm_start;
  /// Finish with an interior-point solve on the Frank-Wolfe support.
  bool polish = true;
  bool record_trace = false;
};

/// Maximizes lambda_min(sum_i p_i g_i g_i^T) over the simplex.
DesignSolution solve_min_eig_design(const EigInstance& inst, const EigSolverOptions& opts = {});
DesignSolution solve_min_eig_design(const EigInstance& inst, int max_iters, double tol);

/// Caratheodory support reduction that keeps the objective. Continuous
/// case: support <= d(d+1)/2 + 1 (one further step is taken when it moves
/// the objective by at most 1e-6); finite case: support <= J.
Design sparsify_design(const Design& design, const EigInstance& inst);
Design sparsify_design(const Design& design, const LpInstance& inst);

/// Exhaustive search over the grid {k / resolution} of the simplex.
/// Requires n <= 6.
DesignSolution brute_force_design(const LpInstance& inst, int resolution);
DesignSolution brute_force_design(const EigInstance& inst, int resolution);

}  // namespace chernoff
