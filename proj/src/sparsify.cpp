#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "chernoff/design_opt.hpp"

namespace chernoff {

namespace {

// Caratheodory reduction over per-arm moment vectors (the quantities the
// objective depends on); the mass coordinate is appended internally.
struct Reducer {
  Eigen::MatrixXd moments;

  // One Caratheodory step on `window`: finds z with moments*z = 0 and
  // sum(z) = 0, then moves p along -z until an atom vanishes.
  bool exact_step(std::vector<double>& p, const std::vector<Eigen::Index>& window) const {
    const Eigen::Index rows = moments.rows() + 1;
    const Eigen::Index cols = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      a.col(c).head(moments.rows()) = moments.col(window[static_cast<std::size_t>(c)]);
      a(rows - 1, c) = 1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::MatrixXd ker = lu.kernel();
    if (ker.cols() == 0 || ker.col(0).cwiseAbs().maxCoeff() == 0.0) return false;
    return move_along(p, window, ker.col(0));
  }

  static bool move_along(std::vector<double>& p, const std::vector<Eigen::Index>& window,
                         Eigen::VectorXd z) {
    if (z.maxCoeff() <= 0.0) z = -z;
    double alpha = std::numeric_limits<double>::infinity();
    Eigen::Index hit = -1;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      if (z(c) <= 0.0) continue;
      const double r = p[static_cast<std::size_t>(window[static_cast<std::size_t>(c)])] / z(c);
      if (r < alpha) {
        alpha = r;
        hit = c;
      }
    }
    if (hit < 0) return false;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      double& v = p[static_cast<std::size_t>(window[static_cast<std::size_t>(c)])];
      v = std::max(v - alpha * z(c), 0.0);
    }
    p[static_cast<std::size_t>(window[static_cast<std::size_t>(hit)])] = 0.0;
    return true;
  }

  std::vector<double> reduce(std::vector<double> p, double eps) const {
    const std::size_t limit = static_cast<std::size_t>(moments.rows()) + 1;
    for (;;) {
      std::vector<Eigen::Index> support;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > eps) support.push_back(static_cast<Eigen::Index>(i));
        else p[i] = 0.0;
      }
      if (support.size() <= 1) break;
      // Past the dimension bound keep going while the support is still
      // linearly dependent (duplicated or collinear moments).
      const std::size_t width = std::min(support.size(), limit + 1);
      std::vector<Eigen::Index> window(support.begin(),
                                       support.begin() + static_cast<std::ptrdiff_t>(width));
      if (!exact_step(p, window)) break;
    }
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
    return p;
  }
};

Eigen::MatrixXd eig_moments(const EigInstance& inst) {
  const Eigen::Index d = inst.grads.cols();
  const Eigen::Index n = inst.grads.rows();
  Eigen::MatrixXd out(d * (d + 1) / 2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index r = 0;
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = a; b < d; ++b) out(r++, i) = inst.grads(i, a) * inst.grads(i, b);
    }
  }
  return out;
}

}  // namespace

Design sparsify_design(const Design& design, const EigInstance& inst) {
  design.validate();
  inst.validate();
  if (design.size() != inst.arm_count()) throw InvalidArgument("sparsify_design: size mismatch");
  const double obj0 = inst.objective(design.probs);

  Reducer red{eig_moments(inst)};
  std::vector<double> p = red.reduce(design.probs, design.support_eps);

  // One more atom can go when dropping the mass constraint only rescales
  // the information matrix by a factor that leaves the objective in place.
  std::vector<Eigen::Index> support;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > design.support_eps) support.push_back(static_cast<Eigen::Index>(i));
  }
  if (support.size() > static_cast<std::size_t>(red.moments.rows())) {
    Eigen::MatrixXd a(red.moments.rows(), static_cast<Eigen::Index>(support.size()));
    for (Eigen::Index c = 0; c < a.cols(); ++c) a.col(c) = red.moments.col(support[static_cast<std::size_t>(c)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::MatrixXd ker = lu.kernel();
    if (ker.cols() > 0 && ker.col(0).cwiseAbs().maxCoeff() > 0.0) {
      Eigen::VectorXd z = ker.col(0);
      if (z.sum() < 0.0) z = -z;
      std::vector<double> q = p;
      if (Reducer::move_along(q, support, z)) {
        const double total = std::accumulate(q.begin(), q.end(), 0.0);
        if (total > 0.0) {
          for (double& v : q) v /= total;
          if (std::abs(inst.objective(q) - obj0) <= 1e-6) p = std::move(q);
        }
      }
    }
  }

  Design out;
  out.probs = std::move(p);
  out.support_eps = design.support_eps;
  if (std::abs(inst.objective(out.probs) - obj0) > 1e-6 ||
      out.support_size() > design.support_size()) {
    return design;
  }
  return out;
}

Design sparsify_design(const Design& design, const LpInstance& inst) {
  design.validate();
  inst.validate();
  if (design.size() != inst.arm_count()) throw InvalidArgument("sparsify_design: size mismatch");
  const double obj0 = inst.objective(design.probs);

  Reducer red{inst.gaps_sq};
  Design out;
  out.probs = red.reduce(design.probs, design.support_eps);
  out.support_eps = design.support_eps;
  if (std::abs(inst.objective(out.probs) - obj0) > 1e-6 ||
      out.support_size() > design.support_size()) {
    return design;
  }
  return out;
}

}  // namespace chernoff
