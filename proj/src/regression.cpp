#include "chernoff/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chernoff {

namespace {

constexpr std::size_t kReluParams = 8;
constexpr std::size_t kReluDim = 6;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_features(const Eigen::MatrixXd& x) {
  if (x.rows() < 1 || x.cols() < 1) throw InvalidArgument("ParamModel: empty feature matrix");
  if (!x.allFinite()) throw InvalidArgument("ParamModel: non-finite feature");
}

}  // namespace

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    case ModelKind::relu_net: return "relu_net";
  }
  return "unknown";
}

ParamModel ParamModel::linear(Eigen::MatrixXd features) {
  check_features(features);
  ParamModel m;
  m.kind_ = ModelKind::linear;
  m.x_ = std::move(features);
  return m;
}

ParamModel ParamModel::logistic(Eigen::MatrixXd features) {
  check_features(features);
  ParamModel m;
  m.kind_ = ModelKind::logistic;
  m.x_ = std::move(features);
  return m;
}

ParamModel ParamModel::relu_net(Eigen::MatrixXd points) {
  check_features(points);
  if (points.cols() != 2) throw InvalidArgument("relu_net: points must be 2-dimensional");
  ParamModel m;
  m.kind_ = ModelKind::relu_net;
  m.x_ = std::move(points);
  return m;
}

std::size_t ParamModel::dim() const {
  return kind_ == ModelKind::relu_net ? kReluDim : static_cast<std::size_t>(x_.cols());
}

std::size_t ParamModel::param_size() const {
  return kind_ == ModelKind::relu_net ? kReluParams : static_cast<std::size_t>(x_.cols());
}

void ParamModel::check_theta(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != param_size()) {
    throw InvalidArgument("ParamModel: parameter vector has the wrong length");
  }
  if (kind_ == ModelKind::relu_net) {
    for (int k : {6, 7}) {
      if (theta(k) != 1.0 && theta(k) != -1.0) throw InvalidArgument("relu_net: output weights must be +-1");
    }
  }
}

void ParamModel::check_access(ArmIndex arm, const Eigen::VectorXd& theta) const {
  if (arm >= arm_count()) throw InvalidArgument("ParamModel: arm index out of range");
  if (static_cast<std::size_t>(theta.size()) != param_size()) {
    throw InvalidArgument("ParamModel: parameter vector has the wrong length");
  }
}

double ParamModel::mean(ArmIndex arm, const Eigen::VectorXd& theta) const {
  check_access(arm, theta);
  const auto i = static_cast<Eigen::Index>(arm);
  switch (kind_) {
    case ModelKind::linear:
      return x_.row(i).dot(theta);
    case ModelKind::logistic:
      return sigmoid(x_.row(i).dot(theta));
    case ModelKind::relu_net: {
      const double a1 = theta(0) * x_(i, 0) + theta(1) * x_(i, 1) + theta(2);
      const double a2 = theta(3) * x_(i, 0) + theta(4) * x_(i, 1) + theta(5);
      return theta(6) * std::max(a1, 0.0) + theta(7) * std::max(a2, 0.0);
    }
  }
  return 0.0;
}

Eigen::VectorXd ParamModel::grad(ArmIndex arm, const Eigen::VectorXd& theta) const {
  check_access(arm, theta);
  const auto i = static_cast<Eigen::Index>(arm);
  switch (kind_) {
    case ModelKind::linear:
      return x_.row(i).transpose();
    case ModelKind::logistic: {
      const double m = sigmoid(x_.row(i).dot(theta));
      return m * (1.0 - m) * x_.row(i).transpose();
    }
    case ModelKind::relu_net: {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(kReluDim);
      const double a1 = theta(0) * x_(i, 0) + theta(1) * x_(i, 1) + theta(2);
      const double a2 = theta(3) * x_(i, 0) + theta(4) * x_(i, 1) + theta(5);
      if (a1 > 0.0) g.head(3) << theta(6) * x_(i, 0), theta(6) * x_(i, 1), theta(6);
      if (a2 > 0.0) g.tail(3) << theta(7) * x_(i, 0), theta(7) * x_(i, 1), theta(7);
      return g;
    }
  }
  return {};
}

Eigen::VectorXd ParamModel::means(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd out(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) out(i) = mean(static_cast<ArmIndex>(i), theta);
  return out;
}

Eigen::MatrixXd ParamModel::jacobian(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd out(x_.rows(), static_cast<Eigen::Index>(dim()));
  for (Eigen::Index i = 0; i < x_.rows(); ++i) out.row(i) = grad(static_cast<ArmIndex>(i), theta).transpose();
  return out;
}

double ParamModel::distance(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_star) const {
  const double direct = (theta - theta_star).norm();
  if (kind_ != ModelKind::relu_net) return direct;
  Eigen::VectorXd swapped(kReluParams);
  swapped << theta.segment(3, 3), theta.segment(0, 3), theta(7), theta(6);
  return std::min(direct, (swapped - theta_star).norm());
}

ArmStats ArmStats::from(std::size_t n, const std::vector<ArmIndex>& arms, const std::vector<double>& obs) {
  if (arms.size() != obs.size()) throw InvalidArgument("ArmStats: arms and observations differ in length");
  ArmStats s(n);
  for (std::size_t k = 0; k < arms.size(); ++k) s.add(arms[k], obs[k]);
  return s;
}

void ArmStats::add(ArmIndex arm, double y) {
  if (arm >= count.size()) throw InvalidArgument("ArmStats: arm out of range");
  count[arm] += 1.0;
  sum[arm] += y;
  sumsq[arm] += y * y;
}

double ArmStats::total() const {
  double t = 0.0;
  for (double c : count) t += c;
  return t;
}

namespace {

// L(theta) = sum_i c_i (mu_i - ybar_i)^2 + residual constant; the constant
// does not move the minimizer so the solver works with the first part.
double centered_loss(const ParamModel& model, const ArmStats& s, const Eigen::VectorXd& theta) {
  double l = 0.0;
  for (std::size_t i = 0; i < s.count.size(); ++i) {
    if (s.count[i] == 0.0) continue;
    const double r = model.mean(i, theta) - s.sum[i] / s.count[i];
    l += s.count[i] * r * r;
  }
  return l;
}

double loss_constant(const ArmStats& s) {
  double c = 0.0;
  for (std::size_t i = 0; i < s.count.size(); ++i) {
    if (s.count[i] == 0.0) continue;
    c += std::max(s.sumsq[i] - s.sum[i] * s.sum[i] / s.count[i], 0.0);
  }
  return c;
}

// Normal equations of the Gauss-Newton model: H = sum c J J^T, b = sum c r J.
void normal_equations(const ParamModel& model, const ArmStats& s, const Eigen::VectorXd& theta,
                      Eigen::MatrixXd& h, Eigen::VectorXd& b) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  h.setZero(d, d);
  b.setZero(d);
  for (std::size_t i = 0; i < s.count.size(); ++i) {
    if (s.count[i] == 0.0) continue;
    const Eigen::VectorXd g = model.grad(i, theta);
    const double r = model.mean(i, theta) - s.sum[i] / s.count[i];
    h.selfadjointView<Eigen::Lower>().rankUpdate(g, s.count[i]);
    b += (s.count[i] * r) * g;
  }
  h = h.selfadjointView<Eigen::Lower>();
}

FitResult fit_fixed(const ParamModel& model, const ArmStats& s, Eigen::VectorXd theta,
                    const FitOptions& opts) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const double constant = loss_constant(s);
  FitResult res;
  double loss = centered_loss(model, s, theta);
  double lambda = 1e-3;
  int rejects = 0;
  Eigen::MatrixXd h;
  Eigen::VectorXd b;
  normal_equations(model, s, theta, h, b);
  for (res.iters = 0; res.iters < opts.max_iters; ++res.iters) {
    const double gnorm = 2.0 * b.norm();
    if (gnorm <= opts.grad_tol * (1.0 + loss + constant)) {
      res.converged = true;
      break;
    }
    const Eigen::VectorXd diag = h.diagonal();
    const double floor = 1e-12 * (1.0 + diag.maxCoeff());
    Eigen::MatrixXd a = h;
    a.diagonal() += lambda * diag.cwiseMax(floor);
    const Eigen::VectorXd step = -a.ldlt().solve(b);
    if (!step.allFinite()) {
      lambda *= 10.0;
      if (++rejects >= opts.max_rejects) {
        res.diverged = true;
        break;
      }
      continue;
    }
    Eigen::VectorXd cand = theta;
    cand.head(d) += step;
    if (opts.theta_bound > 0.0) {
      const double r = cand.head(d).norm();
      if (r > opts.theta_bound) cand.head(d) *= opts.theta_bound / r;
    }
    const double cand_loss = centered_loss(model, s, cand);
    if (cand_loss < loss) {
      const bool tiny = loss - cand_loss <= 1e-15 * (1.0 + loss) &&
                        (cand - theta).norm() <= 1e-12 * (1.0 + theta.head(d).norm());
      theta = std::move(cand);
      loss = cand_loss;
      lambda = std::max(lambda * 0.1, 1e-15);
      rejects = 0;
      normal_equations(model, s, theta, h, b);
      if (tiny) {
        res.converged = true;
        break;
      }
    } else {
      if ((cand - theta).norm() <= 1e-15 * (1.0 + theta.head(d).norm())) {
        // Nothing left to gain at machine precision.
        res.converged = true;
        break;
      }
      lambda *= 10.0;
      if (++rejects >= opts.max_rejects) {
        res.diverged = true;
        break;
      }
    }
  }
  res.theta = std::move(theta);
  res.loss = loss + constant;
  res.grad_norm = 2.0 * b.norm();
  return res;
}

Eigen::VectorXd with_signs(const Eigen::VectorXd& theta, int pattern) {
  Eigen::VectorXd out = theta;
  out(6) = (pattern & 1) ? -1.0 : 1.0;
  out(7) = (pattern & 2) ? -1.0 : 1.0;
  return out;
}

}  // namespace

double squared_loss(const ParamModel& model, const ArmStats& stats, const Eigen::VectorXd& theta) {
  model.check_theta(theta);
  return centered_loss(model, stats, theta) + loss_constant(stats);
}

FitResult fit_least_squares(const ParamModel& model, const ArmStats& stats,
                            const Eigen::VectorXd& init, const FitOptions& opts) {
  model.check_theta(init);
  if (stats.count.size() != model.arm_count()) throw InvalidArgument("fit_least_squares: stats size mismatch");
  if (stats.total() < 1.0) throw InvalidArgument("fit_least_squares: no observations");
  if (model.kind() != ModelKind::relu_net) return fit_fixed(model, stats, init, opts);
  FitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  for (int pattern = 0; pattern < 4; ++pattern) {
    FitResult r = fit_fixed(model, stats, with_signs(init, pattern), opts);
    if (r.loss < best.loss) best = std::move(r);
  }
  return best;
}

FitResult fit_least_squares(const ParamModel& model, const std::vector<ArmIndex>& arms,
                            const std::vector<double>& obs, const Eigen::VectorXd& init,
                            const FitOptions& opts) {
  return fit_least_squares(model, ArmStats::from(model.arm_count(), arms, obs), init, opts);
}

double compute_pt_gap(const std::vector<Design>& design_trace, const ParamModel& model,
                      const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_star) {
  if (design_trace.empty()) throw InvalidArgument("compute_pt_gap: empty design trace");
  model.check_theta(theta);
  model.check_theta(theta_star);
  const Eigen::VectorXd diff = model.means(theta) - model.means(theta_star);
  const Eigen::VectorXd sq = diff.cwiseAbs2();
  double total = 0.0;
  for (const Design& p : design_trace) {
    if (p.size() != model.arm_count()) throw InvalidArgument("compute_pt_gap: design size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) total += p.probs[i] * sq(static_cast<Eigen::Index>(i));
  }
  return total / static_cast<double>(design_trace.size());
}

const char* regression_policy_name(RegressionPolicy p) {
  switch (p) {
    case RegressionPolicy::cs: return "cs";
    case RegressionPolicy::eps_cs: return "eps_cs";
    case RegressionPolicy::uniform: return "uniform";
  }
  return "unknown";
}

RegressionPolicy parse_regression_policy(const std::string& text) {
  if (text == "cs") return RegressionPolicy::cs;
  if (text == "eps_cs") return RegressionPolicy::eps_cs;
  if (text == "uniform") return RegressionPolicy::uniform;
  throw InvalidArgument("unknown regression policy '" + text + "'");
}

RegressionState initial_state(const ParamModel& model, Rng& rng) {
  RegressionState st;
  const std::size_t n = model.arm_count();
  st.stats = ArmStats(n);
  st.design_sum.assign(n, 0.0);
  st.theta_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.param_size()));
  if (model.kind() == ModelKind::relu_net) {
    for (Eigen::Index k = 0; k < 6; ++k) st.theta_hat(k) = 0.1 * standard_normal(rng);
    st.theta_hat(6) = 1.0;
    st.theta_hat(7) = 1.0;
    for (int pattern = 0; pattern < 4; ++pattern) st.starts.push_back(with_signs(st.theta_hat, pattern));
  }
  return st;
}

namespace {

void mix_uniform(Design& p, double weight) {
  const double u = weight / static_cast<double>(p.size());
  for (double& v : p.probs) v = (1.0 - weight) * v + u;
}

}  // namespace

void regression_step(RegressionState& st, const RegressionEnv& env, const RegressionOptions& opts,
                     Rng& rng) {
  const ParamModel& model = env.model;
  const std::size_t n = model.arm_count();
  if (st.stats.count.size() != n || st.design_sum.size() != n) {
    throw InvalidArgument("regression_step: state does not match the model");
  }
  if (opts.batch < 1) throw InvalidArgument("regression_step: batch must be >= 1");
  const std::size_t t = st.round();

  Design p;
  if (opts.policy == RegressionPolicy::uniform) {
    p = Design::uniform(n);
    st.last_support = n;
  } else {
    if (!st.has_cache || t % opts.batch == 0) {
      EigInstance inst{model.jacobian(st.theta_hat)};
      EigSolverOptions so = opts.solver;
      if (st.has_cache && !so.warm_start) so.warm_start = st.cached;
      const DesignSolution sol = solve_min_eig_design(inst, so);
      st.cached = sol.design;
      st.has_cache = true;
      st.last_support = sol.design.support_size();
      if (sol.non_spanning) {
        // Restores identifiability for this round only.
        mix_uniform(st.cached, 0.5);
        ++st.non_spanning_rounds;
      }
    }
    p = st.cached;
    if (opts.policy == RegressionPolicy::eps_cs) {
      mix_uniform(p, 1.0 / std::sqrt(static_cast<double>(t + 1)));
    }
  }

  const ArmIndex arm = p.sample(rng);
  const double y = draw_observation(model.mean(arm, env.theta_star), env.noise, rng);
  st.arms.push_back(arm);
  st.obs.push_back(y);
  st.stats.add(arm, y);
  for (std::size_t i = 0; i < n; ++i) st.design_sum[i] += p.probs[i];
  if (opts.record_designs) st.design_trace.push_back(p);

  FitOptions fo = opts.fit;
  if (fo.theta_bound <= 0.0) fo.theta_bound = env.theta_bound;
  if (model.kind() == ModelKind::relu_net) {
    FitResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (auto& start : st.starts) {
      FitResult r = fit_fixed(model, st.stats, start, fo);
      if (r.diverged) ++st.fit_warnings;
      start = r.theta;
      if (r.loss < best.loss) best = std::move(r);
    }
    st.theta_hat = best.theta;
  } else {
    FitResult r = fit_fixed(model, st.stats, st.theta_hat, fo);
    if (r.diverged) ++st.fit_warnings;
    st.theta_hat = std::move(r.theta);
  }
}

std::vector<std::size_t> checkpoint_schedule(std::size_t horizon) {
  std::vector<std::size_t> out;
  for (int k = 0;; ++k) {
    const auto v = static_cast<std::size_t>(std::ceil(std::pow(10.0, k / 10.0) - 1e-9));
    if (v >= horizon) break;
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  if (horizon >= 1) out.push_back(horizon);
  return out;
}

RegressionMetrics run_regression(const RegressionEnv& env, const RegressionOptions& opts,
                                 std::size_t horizon, std::uint64_t seed) {
  const ParamModel& model = env.model;
  model.check_theta(env.theta_star);
  if (horizon < model.dim()) throw InvalidArgument("run_regression: horizon must be >= dimension");
  Rng rng(seed);
  RegressionState st = initial_state(model, rng);
  RegressionMetrics m;
  m.checkpoints = checkpoint_schedule(horizon);
  const Eigen::VectorXd mu_star = model.means(env.theta_star);
  std::size_t next = 0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    regression_step(st, env, opts, rng);
    if (next < m.checkpoints.size() && m.checkpoints[next] == t) {
      const Eigen::VectorXd diff = model.means(st.theta_hat) - mu_star;
      double gap = 0.0;
      for (std::size_t i = 0; i < model.arm_count(); ++i) {
        gap += st.design_sum[i] * diff(static_cast<Eigen::Index>(i)) * diff(static_cast<Eigen::Index>(i));
      }
      m.est_err.push_back(model.distance(st.theta_hat, env.theta_star));
      m.pt_gap.push_back(gap / static_cast<double>(t));
      m.support_sizes.push_back(st.last_support);
      ++next;
    }
  }
  m.non_spanning_rounds = st.non_spanning_rounds;
  m.fit_warnings = st.fit_warnings;
  return m;
}

}  // namespace chernoff
