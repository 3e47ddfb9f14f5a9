#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "chernoff/design_opt.hpp"
#include "chernoff/linalg.hpp"

namespace chernoff {

bool EigInstance::spanning() const {
  return numerical_rank(grads) == static_cast<int>(dim());
}

void EigInstance::validate() const {
  if (grads.rows() < 1 || grads.cols() < 1) throw InvalidArgument("EigInstance: empty");
  if (!grads.allFinite()) throw InvalidArgument("EigInstance: non-finite gradient");
}

Eigen::MatrixXd EigInstance::information(const std::vector<double>& p) const {
  if (p.size() != arm_count()) throw InvalidArgument("EigInstance::information: size mismatch");
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  return grads.transpose() * pv.asDiagonal() * grads;
}

double EigInstance::objective(const std::vector<double>& p) const {
  return min_eigenvalue(information(p));
}

namespace {

// Soft-min of eigenvalues, -(1/beta) log sum_k exp(-beta lambda_k); a smooth
// concave lower bound on lambda_min that is within log(d)/beta of it.
double soft_min(const Eigen::VectorXd& ascending, double beta) {
  const double lo = ascending(0);
  double s = 0.0;
  for (Eigen::Index k = 0; k < ascending.size(); ++k) s += std::exp(-beta * (ascending(k) - lo));
  return lo - std::log(s) / beta;
}

Eigen::VectorXd eigenvalues_of(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return m.diagonal();
  if (m.rows() == 2) {
    const double mid = 0.5 * (m(0, 0) + m(1, 1));
    const double r = std::hypot(0.5 * (m(0, 0) - m(1, 1)), m(0, 1));
    Eigen::VectorXd v(2);
    v << mid - r, mid + r;
    return v;
  }
  return jacobi_eigenvalues(m);
}

// Maximizes a concave function of gamma on [0, hi] by golden-section search.
template <typename F>
double golden_max(F&& f, double hi, int iters) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = 0.0;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

struct Certificate {
  double lower = 0.0;  // lambda_min of the best design seen
  double upper = std::numeric_limits<double>::infinity();
  std::vector<double> best_p;
};

void consider(Certificate& cert, const std::vector<double>& p, double lambda, double upper) {
  if (cert.best_p.empty() || lambda > cert.lower) {
    cert.lower = lambda;
    cert.best_p = p;
  }
  cert.upper = std::min(cert.upper, upper);
}

// max_i g_i^T W g_i for W = V diag(w) V^T
double max_score(const Eigen::MatrixXd& g, const Eigen::MatrixXd& v, const Eigen::VectorXd& w,
                 Eigen::VectorXd* scores) {
  const Eigen::MatrixXd proj = g * v;
  Eigen::VectorXd s = proj.array().square().matrix() * w;
  const double top = s.maxCoeff();
  if (scores != nullptr) *scores = std::move(s);
  return top;
}

// Pairwise Frank-Wolfe on the soft-min objective with beta continuation.
// Returns the number of iterations used.
int frank_wolfe(const Eigen::MatrixXd& g, std::vector<double>& p, int max_iters, double target,
                Certificate& cert, std::vector<double>* trace) {
  const Eigen::Index n = g.rows();
  const Eigen::Index d = g.cols();
  const double logd = std::log(static_cast<double>(std::max<Eigen::Index>(d, 2)));

  Eigen::Map<Eigen::VectorXd> pv(p.data(), n);
  Eigen::MatrixXd m = g.transpose() * pv.asDiagonal() * g;
  const double mean_eig = std::max(m.trace() / static_cast<double>(d), 1e-300);
  double beta = 10.0 * logd / mean_eig;

  int it = 0;
  for (; it < max_iters; ++it) {
    const SymmetricEigen es = jacobi_eigen(m);
    const double lambda = es.values(0);
    Eigen::VectorXd w(d);
    for (Eigen::Index k = 0; k < d; ++k) w(k) = std::exp(-beta * (es.values(k) - lambda));
    w /= w.sum();

    Eigen::VectorXd scores;
    const double upper_smooth = max_score(g, es.vectors, w, &scores);
    Eigen::VectorXd e_min = Eigen::VectorXd::Zero(d);
    e_min(0) = 1.0;
    const double upper_vec = max_score(g, es.vectors, e_min, nullptr);
    consider(cert, p, lambda, std::min(upper_smooth, upper_vec));

    if (cert.upper - cert.lower <= target) break;

    const double f_now = soft_min(es.values, beta);
    if (trace != nullptr) trace->push_back(f_now);

    Eigen::Index toward = 0;
    scores.maxCoeff(&toward);
    Eigen::Index away = -1;
    double away_score = std::numeric_limits<double>::infinity();
    double inner = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p[static_cast<std::size_t>(i)] <= 0.0) continue;
      inner += p[static_cast<std::size_t>(i)] * scores(i);
      if (scores(i) < away_score) {
        away_score = scores(i);
        away = i;
      }
    }
    const double smooth_gap = scores(toward) - inner;

    // Raise beta once the smoothed problem is solved to its own bias.
    if (smooth_gap <= 0.5 * logd / beta || away == toward) {
      if (logd / beta <= 0.25 * target) break;
      beta *= 4.0;
      continue;
    }

    const Eigen::VectorXd gb = g.row(toward).transpose();
    const Eigen::VectorXd ga = g.row(away).transpose();
    const Eigen::MatrixXd dir = gb * gb.transpose() - ga * ga.transpose();
    const double hi = p[static_cast<std::size_t>(away)];
    auto phi = [&](double gamma) { return soft_min(eigenvalues_of(m + gamma * dir), beta); };
    const double gamma = golden_max(phi, hi, 40);
    if (!(gamma > 0.0) || phi(gamma) <= f_now) {
      // No ascent at this smoothing level.
      if (logd / beta <= 0.25 * target) break;
      beta *= 4.0;
      continue;
    }

    p[static_cast<std::size_t>(toward)] += gamma;
    p[static_cast<std::size_t>(away)] -= gamma;
    if (p[static_cast<std::size_t>(away)] < 1e-15) {
      p[static_cast<std::size_t>(toward)] += p[static_cast<std::size_t>(away)];
      p[static_cast<std::size_t>(away)] = 0.0;
    }
    m += gamma * dir;
  }
  return it;
}

// Log-barrier interior point for  max t  s.t.  sum_i p_i g_i g_i^T - t I > 0,
// p > 0, sum p = 1,  over a candidate support. Returns false if the support
// gives no strictly feasible start.
bool barrier_polish(const Eigen::MatrixXd& g_all, const std::vector<Eigen::Index>& support,
                    std::vector<double>& p_all, double target, Eigen::MatrixXd& w_out) {
  const Eigen::Index m = static_cast<Eigen::Index>(support.size());
  const Eigen::Index d = g_all.cols();
  Eigen::MatrixXd g(m, d);
  for (Eigen::Index k = 0; k < m; ++k) g.row(k) = g_all.row(support[static_cast<std::size_t>(k)]);

  Eigen::VectorXd p(m);
  double total = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    p(k) = p_all[static_cast<std::size_t>(support[static_cast<std::size_t>(k)])];
    total += p(k);
  }
  if (total <= 0.0) p.setConstant(1.0 / static_cast<double>(m));
  else p /= total;
  p = 0.95 * p + Eigen::VectorXd::Constant(m, 0.05 / static_cast<double>(m));

  auto info = [&](const Eigen::VectorXd& q) -> Eigen::MatrixXd {
    return g.transpose() * q.asDiagonal() * g;
  };
  const double lambda0 = min_eigenvalue(info(p));
  if (!(lambda0 > 0.0)) return false;
  double t = 0.5 * lambda0;

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const double degree = static_cast<double>(m + d);
  double mu = 0.1 * lambda0 / degree;

  auto barrier_value = [&](const Eigen::VectorXd& q, double tt, double mu_) -> double {
    if (q.minCoeff() <= 0.0) return -std::numeric_limits<double>::infinity();
    Eigen::LLT<Eigen::MatrixXd> llt(info(q) - tt * eye);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!(l(k, k) > 0.0)) return -std::numeric_limits<double>::infinity();
      logdet += 2.0 * std::log(l(k, k));
    }
    return tt + mu_ * (logdet + q.array().log().sum());
  };

  for (int outer = 0; outer < 40; ++outer) {
    for (int newton = 0; newton < 60; ++newton) {
      Eigen::LLT<Eigen::MatrixXd> llt(info(p) - t * eye);
      if (llt.info() != Eigen::Success) return false;
      const Eigen::MatrixXd s_inv = llt.solve(eye);
      const Eigen::MatrixXd s_inv2 = s_inv * s_inv;
      const Eigen::MatrixXd k_mat = g * s_inv * g.transpose();
      const Eigen::VectorXd k_diag = k_mat.diagonal();
      const Eigen::VectorXd h_pt = (g * s_inv2 * g.transpose()).diagonal();

      Eigen::VectorXd grad(m + 1);
      grad.head(m) = mu * (k_diag.array() + p.array().inverse()).matrix();
      grad(m) = 1.0 - mu * s_inv.trace();

      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 2, m + 2);
      kkt.topLeftCorner(m, m) = -mu * k_mat.array().square().matrix();
      kkt.topLeftCorner(m, m).diagonal() -= mu * p.array().square().inverse().matrix();
      kkt.block(0, m, m, 1) = mu * h_pt;
      kkt.block(m, 0, 1, m) = mu * h_pt.transpose();
      kkt(m, m) = -mu * s_inv2.trace();
      kkt.block(0, m + 1, m, 1).setOnes();
      kkt.block(m + 1, 0, 1, m).setOnes();

      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 2);
      rhs.head(m + 1) = -grad;
      const Eigen::VectorXd step = kkt.partialPivLu().solve(rhs);
      const Eigen::VectorXd dp = step.head(m);
      const double dt = step(m);
      const double decrement = -(grad.head(m).dot(dp) + grad(m) * dt);
      if (!std::isfinite(decrement)) return false;
      if (std::abs(decrement) <= 1e-14 * std::max(1.0, std::abs(t))) break;

      double alpha = 1.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        if (dp(k) < 0.0) alpha = std::min(alpha, -0.99 * p(k) / dp(k));
      }
      const double f0 = barrier_value(p, t, mu);
      const double slope = grad.head(m).dot(dp) + grad(m) * dt;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd pn = p + alpha * dp;
        const double tn = t + alpha * dt;
        const double fn = barrier_value(pn, tn, mu);
        if (std::isfinite(fn) && fn >= f0 + 0.25 * alpha * slope) {
          p = pn / pn.sum();
          t = tn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    if (mu * degree <= 0.01 * target) break;
    mu *= 0.1;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(info(p) - t * eye);
  if (llt.info() != Eigen::Success) return false;
  Eigen::MatrixXd s_inv = llt.solve(eye);
  w_out = s_inv / s_inv.trace();

  std::fill(p_all.begin(), p_all.end(), 0.0);
  const double pmax = p.maxCoeff();
  double kept = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (p(k) > 1e-10 * pmax) {
      p_all[static_cast<std::size_t>(support[static_cast<std::size_t>(k)])] = p(k);
      kept += p(k);
    }
  }
  for (double& v : p_all) v /= kept;
  return true;
}

DesignSolution solve_spanning(const Eigen::MatrixXd& g, const EigSolverOptions& opts) {
  const Eigen::Index n = g.rows();
  const Eigen::Index d = g.cols();
  DesignSolution sol;

  std::vector<double> p;
  if (opts.warm_start && opts.warm_start->size() == static_cast<std::size_t>(n)) {
    p = opts.warm_start->probs;
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (!(total > 0.0)) p.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    else for (double& v : p) v = std::max(v, 0.0) / total;
  } else {
    p.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  }

  Certificate cert;
  const double fw_target = opts.polish ? std::max(opts.tol, 1e-3) : opts.tol;
  sol.iters = frank_wolfe(g, p, opts.max_iters, fw_target, cert,
                          opts.record_trace ? &sol.trace : nullptr);
  p = cert.best_p;

  if (opts.polish && cert.upper - cert.lower > opts.tol) {
    // Candidate support: current atoms plus the best-scoring arms.
    const Eigen::MatrixXd m = g.transpose() *
                              Eigen::Map<const Eigen::VectorXd>(p.data(), n).asDiagonal() * g;
    const SymmetricEigen es = jacobi_eigen(m);
    Eigen::VectorXd scores = (g * es.vectors.col(0)).array().square().matrix();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    const std::size_t extra = static_cast<std::size_t>(d * (d + 1) / 2 + 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p[static_cast<std::size_t>(i)] > 1e-6 / static_cast<double>(n)) in[static_cast<std::size_t>(i)] = 1;
    }
    for (std::size_t k = 0; k < std::min(extra, order.size()); ++k) in[static_cast<std::size_t>(order[k])] = 1;

    for (int round = 0; round < 20; ++round) {
      std::vector<Eigen::Index> support;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in[static_cast<std::size_t>(i)]) support.push_back(i);
      }
      std::vector<double> q = p;
      Eigen::MatrixXd w;
      if (!barrier_polish(g, support, q, opts.tol, w)) break;
      const Eigen::VectorXd s = ((g * w).array() * g.array()).rowwise().sum();
      const double lambda = min_eigenvalue(
          g.transpose() * Eigen::Map<const Eigen::VectorXd>(q.data(), n).asDiagonal() * g);
      consider(cert, q, lambda, s.maxCoeff());
      p = cert.best_p;
      if (cert.upper - cert.lower <= opts.tol) break;

      // Column generation: add the arms violating the certificate most.
      std::vector<Eigen::Index> viol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!in[static_cast<std::size_t>(i)] && s(i) > lambda + 0.5 * opts.tol) viol.push_back(i);
      }
      if (viol.empty()) break;
      std::stable_sort(viol.begin(), viol.end(), [&](Eigen::Index a, Eigen::Index b) { return s(a) > s(b); });
      for (std::size_t k = 0; k < std::min<std::size_t>(viol.size(), 10); ++k) in[static_cast<std::size_t>(viol[k])] = 1;
    }
  }

  sol.design.probs = cert.best_p;
  sol.objective = std::max(cert.lower, 0.0);
  sol.duality_gap = std::max(cert.upper - cert.lower, 0.0);
  sol.converged = sol.duality_gap <= opts.tol;
  return sol;
}

}  // namespace

DesignSolution solve_min_eig_design(const EigInstance& inst, const EigSolverOptions& opts) {
  inst.validate();
  const Eigen::Index n = inst.grads.rows();
  const Eigen::Index d = inst.grads.cols();
  if (opts.warm_start) opts.warm_start->validate();

  const double scale = inst.grads.rowwise().squaredNorm().maxCoeff();
  DesignSolution sol;
  if (!(scale > 0.0)) {
    sol.design = Design::uniform(static_cast<std::size_t>(n));
    sol.non_spanning = true;
    return sol;
  }
  const Eigen::MatrixXd g = inst.grads / std::sqrt(scale);

  const int rank = numerical_rank(g);
  if (rank < d) {
    // Best effort: optimize within the span of the gradients.
    sol.non_spanning = true;
    if (rank == 0) {
      sol.design = Design::uniform(static_cast<std::size_t>(n));
      return sol;
    }
    const SymmetricEigen es = jacobi_eigen(g.transpose() * g);
    const Eigen::MatrixXd basis = es.vectors.rightCols(rank);
    EigSolverOptions sub = opts;
    sub.record_trace = false;
    DesignSolution inner = solve_spanning(g * basis, sub);
    sol.design = std::move(inner.design);
    sol.iters = inner.iters;
    sol.objective = 0.0;
    return sol;
  }

  sol = solve_spanning(g, opts);
  sol.objective *= scale;
  sol.duality_gap *= scale;
  for (double& v : sol.trace) v *= scale;
  return sol;
}

DesignSolution solve_min_eig_design(const EigInstance& inst, int max_iters, double tol) {
  EigSolverOptions opts;
  opts.max_iters = max_iters;
  opts.tol = tol;
  return solve_min_eig_design(inst, opts);
}

}  // namespace chernoff
