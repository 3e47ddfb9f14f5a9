#include <Eigen/Eigenvalues>
#include <limits>
#include <vector>

#include "chernoff/design_opt.hpp"

namespace chernoff {

namespace {

void check_grid(std::size_t n, int resolution) {
  if (n > 6) throw InvalidArgument("brute_force_design: at most 6 arms");
  if (n == 0) throw InvalidArgument("brute_force_design: no arms");
  if (resolution < 1) throw InvalidArgument("brute_force_design: resolution must be >= 1");
}

// Enumerates every composition of `resolution` into n parts. `acc` holds the
// running moment sum of the arms fixed so far; the last arm takes the rest.
template <typename Eval>
struct GridSearch {
  const Eigen::MatrixXd& cols;  // moment vector of each arm, one column per arm
  int resolution;
  Eval eval;
  std::vector<int> counts;
  std::vector<int> best_counts;
  double best = -std::numeric_limits<double>::infinity();

  void run() {
    counts.assign(static_cast<std::size_t>(cols.cols()), 0);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cols.rows());
    recurse(0, resolution, acc);
  }

  void recurse(Eigen::Index arm, int left, const Eigen::VectorXd& acc) {
    const double step = 1.0 / resolution;
    if (arm == cols.cols() - 1) {
      counts[static_cast<std::size_t>(arm)] = left;
      const Eigen::VectorXd total = acc + (left * step) * cols.col(arm);
      const double v = eval(total);
      if (v > best) {
        best = v;
        best_counts = counts;
      }
      return;
    }
    for (int k = 0; k <= left; ++k) {
      counts[static_cast<std::size_t>(arm)] = k;
      recurse(arm + 1, left - k, acc + (k * step) * cols.col(arm));
    }
  }
};

template <typename Eval>
DesignSolution grid_solution(const Eigen::MatrixXd& cols, int resolution, Eval eval) {
  GridSearch<Eval> search{cols, resolution, eval, {}, {}};
  search.run();
  DesignSolution sol;
  sol.design.probs.resize(search.best_counts.size());
  for (std::size_t i = 0; i < search.best_counts.size(); ++i) {
    sol.design.probs[i] = static_cast<double>(search.best_counts[i]) / resolution;
  }
  sol.objective = search.best;
  sol.converged = true;
  return sol;
}

}  // namespace

DesignSolution brute_force_design(const LpInstance& inst, int resolution) {
  inst.validate();
  check_grid(inst.arm_count(), resolution);
  return grid_solution(inst.gaps_sq, resolution,
                       [](const Eigen::VectorXd& rows) { return rows.minCoeff(); });
}

DesignSolution brute_force_design(const EigInstance& inst, int resolution) {
  inst.validate();
  check_grid(inst.arm_count(), resolution);
  const Eigen::Index d = inst.grads.cols();
  // Column i is vec(g_i g_i^T), column-major.
  Eigen::MatrixXd cols(d * d, inst.grads.rows());
  for (Eigen::Index i = 0; i < inst.grads.rows(); ++i) {
    const Eigen::VectorXd g = inst.grads.row(i).transpose();
    const Eigen::MatrixXd outer = g * g.transpose();
    cols.col(i) = Eigen::Map<const Eigen::VectorXd>(outer.data(), d * d);
  }
  // Independent eigen path: Eigen's closed-form / QR solvers.
  auto eval = [d](const Eigen::VectorXd& flat) {
    const Eigen::Map<const Eigen::MatrixXd> m(flat.data(), d, d);
    if (d == 1) return m(0, 0);
    if (d == 2) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
      es.computeDirect(Eigen::Matrix2d(m), Eigen::EigenvaluesOnly);
      return es.eigenvalues()(0);
    }
    if (d == 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(Eigen::Matrix3d(m), Eigen::EigenvaluesOnly);
      return es.eigenvalues()(0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  };
  return grid_solution(cols, resolution, eval);
}

}  // namespace chernoff
