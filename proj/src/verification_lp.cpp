#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "chernoff/design_opt.hpp"

namespace chernoff {

LpInstance LpInstance::verification(const MeansTable& means, HypIndex hyp) {
  if (hyp >= means.hyp_count()) throw InvalidArgument("verification: hypothesis out of range");
  const std::size_t n = means.arm_count();
  const std::size_t rows = means.hyp_count() - 1;
  LpInstance inst;
  inst.gaps_sq.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (HypIndex alt = 0; alt < means.hyp_count(); ++alt) {
    if (alt == hyp) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = means(i, hyp) - means(i, alt);
      inst.gaps_sq(k, static_cast<Eigen::Index>(i)) = g * g;
    }
    ++k;
  }
  return inst;
}

void LpInstance::validate() const {
  if (gaps_sq.rows() < 1 || gaps_sq.cols() < 1) throw InvalidArgument("LpInstance: empty");
  for (Eigen::Index r = 0; r < gaps_sq.rows(); ++r) {
    for (Eigen::Index c = 0; c < gaps_sq.cols(); ++c) {
      const double v = gaps_sq(r, c);
      if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("LpInstance: entries must be finite and >= 0");
    }
  }
}

double LpInstance::objective(const std::vector<double>& p) const {
  if (p.size() != arm_count()) throw InvalidArgument("LpInstance::objective: size mismatch");
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  return (gaps_sq * pv).minCoeff();
}

namespace {

// Dense tableau for
//   max l  s.t.  l - G_k . p + s_k = 0  (k < K),   1 . p + s_sum = 1,   p, l, s >= 0.
// Columns: [p_0 .. p_{n-1}, l, s_0 .. s_{K-1}, s_sum | rhs].
class EpigraphSimplex {
 public:
  explicit EpigraphSimplex(const Eigen::MatrixXd& g) : k_(g.rows()), n_(g.cols()) {
    rows_ = k_ + 1;
    cols_ = n_ + 1 + k_ + 1;
    tab_ = Eigen::MatrixXd::Zero(rows_ + 1, cols_ + 1);
    for (Eigen::Index r = 0; r < k_; ++r) {
      tab_.row(r).head(n_) = -g.row(r);
      tab_(r, n_) = 1.0;
      tab_(r, n_ + 1 + r) = 1.0;
    }
    tab_.row(k_).head(n_).setOnes();
    tab_(k_, n_ + 1 + k_) = 1.0;
    tab_(k_, cols_) = 1.0;
    tab_(rows_, n_) = -1.0;  // reduced costs for max l
    basis_.resize(static_cast<std::size_t>(rows_));
    for (Eigen::Index r = 0; r < rows_; ++r) basis_[static_cast<std::size_t>(r)] = n_ + 1 + r;
  }

  int solve(int max_pivots) {
    int pivots = 0;
    int degenerate_run = 0;
    while (pivots < max_pivots) {
      const bool bland = degenerate_run > 50;
      const Eigen::Index enter = entering(bland);
      if (enter < 0) return pivots;
      const Eigen::Index leave = leaving(enter);
      if (leave < 0) return -1;  // unbounded; cannot happen for this LP
      degenerate_run = tab_(leave, cols_) <= kZero ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++pivots;
    }
    return pivots;
  }

  double value(Eigen::Index col) const {
    for (Eigen::Index r = 0; r < rows_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] == col) return tab_(r, cols_);
    }
    return 0.0;
  }

  // Dual price of constraint row r (reduced cost of its slack).
  double dual(Eigen::Index r) const { return tab_(rows_, n_ + 1 + r); }

 private:
  static constexpr double kZero = 1e-15;
  static constexpr double kPivotTol = 1e-12;
  static constexpr double kCostTol = 1e-15;

  Eigen::Index entering(bool bland) const {
    Eigen::Index best = -1;
    double best_cost = -kCostTol;
    for (Eigen::Index c = 0; c < cols_; ++c) {
      const double rc = tab_(rows_, c);
      if (rc < -kCostTol) {
        if (bland) return c;
        if (rc < best_cost) {
          best_cost = rc;
          best = c;
        }
      }
    }
    return best;
  }

  Eigen::Index leaving(Eigen::Index enter) const {
    Eigen::Index best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < rows_; ++r) {
      const double a = tab_(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(tab_(r, cols_), 0.0) / a;
      if (ratio < best_ratio - 1e-15 ||
          (std::abs(ratio - best_ratio) <= 1e-15 && best >= 0 &&
           basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(best)])) {
        best_ratio = ratio;
        best = r;
      }
    }
    return best;
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    tab_.row(r) /= tab_(r, c);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = tab_(i, c);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  Eigen::Index k_, n_, rows_, cols_;
  Eigen::MatrixXd tab_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

DesignSolution solve_verification_lp(const LpInstance& inst) {
  inst.validate();
  const Eigen::Index k = inst.gaps_sq.rows();
  const Eigen::Index n = inst.gaps_sq.cols();
  DesignSolution sol;

  const double scale = inst.gaps_sq.maxCoeff();
  bool zero_row = false;
  for (Eigen::Index r = 0; r < k; ++r) zero_row = zero_row || inst.gaps_sq.row(r).maxCoeff() <= 0.0;
  if (scale <= 0.0 || zero_row) {
    sol.design = Design::uniform(static_cast<std::size_t>(n));
    sol.objective = 0.0;
    sol.degenerate = true;
    sol.converged = true;
    return sol;
  }

  EpigraphSimplex lp(inst.gaps_sq / scale);
  const int pivots = lp.solve(static_cast<int>(50 * (n + k + 2)));
  sol.iters = std::max(pivots, 0);

  std::vector<double> p(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = std::max(lp.value(i), 0.0);
    total += p[static_cast<std::size_t>(i)];
  }
  if (total <= 0.0) {
    sol.design = Design::uniform(static_cast<std::size_t>(n));
  } else {
    for (double& v : p) v /= total;
    sol.design.probs = std::move(p);
  }
  sol.objective = inst.objective(sol.design.probs);

  // Dual certificate: any distribution w over alternatives bounds the
  // optimum by max_i sum_k w_k G_ki.
  Eigen::VectorXd w(k);
  for (Eigen::Index r = 0; r < k; ++r) w(r) = std::max(lp.dual(r), 0.0);
  const double wsum = w.sum();
  if (wsum > 0.0) {
    w /= wsum;
    const double upper = (inst.gaps_sq.transpose() * w).maxCoeff();
    sol.duality_gap = std::max(upper - sol.objective, 0.0);
  } else {
    sol.duality_gap = std::numeric_limits<double>::infinity();
  }
  sol.converged = pivots >= 0 && sol.duality_gap <= 1e-8 * std::max(1.0, scale);
  if (sol.objective <= 0.0) sol.degenerate = true;
  return sol;
}

}  // namespace chernoff
