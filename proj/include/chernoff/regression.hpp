#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "chernoff/core.hpp"
#include "chernoff/design_opt.hpp"

namespace chernoff {

enum class ModelKind { linear, logistic, relu_net };

/// Differentiable mean family mu_i(theta) over a fixed set of arms.
///
/// relu_net parameters are (w1[2], b1, w2[2], b2, c1, c2) with c in {-1, 1};
/// the first six are continuous and are the only ones differentiated.
class ParamModel {
 public:
  ParamModel() = default;
  static ParamModel linear(Eigen::MatrixXd features);
  static ParamModel logistic(Eigen::MatrixXd features);
  static ParamModel relu_net(Eigen::MatrixXd points);

  ModelKind kind() const { return kind_; }
  const Eigen::MatrixXd& features() const { return x_; }
  std::size_t arm_count() const { return static_cast<std::size_t>(x_.rows()); }
  /// Number of continuous parameters (gradient length).
  std::size_t dim() const;
  /// Length of a full parameter vector.
  std::size_t param_size() const;

  double mean(ArmIndex arm, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd grad(ArmIndex arm, const Eigen::VectorXd& theta) const;
  Eigen::VectorXd means(const Eigen::VectorXd& theta) const;
  /// One gradient row per arm.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const;

  /// ||theta - theta_star||, taken up to the hidden-unit swap for relu_net.
  double distance(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_star) const;

  void check_theta(const Eigen::VectorXd& theta) const;

 private:
  void check_access(ArmIndex arm, const Eigen::VectorXd& theta) const;

  ModelKind kind_ = ModelKind::linear;
  Eigen::MatrixXd x_;
};

const char* model_kind_name(ModelKind k);

/// Per-arm sufficient statistics of the observations. The squared-error
/// loss only depends on the data through these.
struct ArmStats {
  std::vector<double> count;
  std::vector<double> sum;
  std::vector<double> sumsq;

  explicit ArmStats(std::size_t n = 0) : count(n, 0.0), sum(n, 0.0), sumsq(n, 0.0) {}
  static ArmStats from(std::size_t n, const std::vector<ArmIndex>& arms, const std::vector<double>& obs);
  void add(ArmIndex arm, double y);
  double total() const;
};

/// Sum of squared errors L(theta).
double squared_loss(const ParamModel& model, const ArmStats& stats, const Eigen::VectorXd& theta);

struct FitOptions {
  int max_iters = 200;
  double grad_tol = 1e-10;  // relative to 1 + L
  int max_rejects = 50;
  /// When > 0 the estimate is kept inside the ball ||theta|| <= theta_bound
  /// (continuous coordinates).
  double theta_bound = 0.0;
};

struct FitResult {
  Eigen::VectorXd theta;
  double loss = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  bool converged = false;
  bool diverged = false;  // max_rejects consecutive rejected steps
};

/// Levenberg-Marquardt from `init`. relu_net tries all four output sign
/// patterns and keeps the best.
FitResult fit_least_squares(const ParamModel& model, const ArmStats& stats,
                            const Eigen::VectorXd& init, const FitOptions& opts = {});
FitResult fit_least_squares(const ParamModel& model, const std::vector<ArmIndex>& arms,
                            const std::vector<double>& obs, const Eigen::VectorXd& init,
                            const FitOptions& opts = {});

/// (1/t) sum_s sum_i p_s(i) (mu_i(theta) - mu_i(theta_star))^2
double compute_pt_gap(const std::vector<Design>& design_trace, const ParamModel& model,
                      const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_star);

struct RegressionEnv {
  std::string name;
  ParamModel model;
  Eigen::VectorXd theta_star;
  NoiseSpec noise;
  /// Radius of the parameter ball searched by the estimator; 0 = unbounded.
  double theta_bound = 0.0;
};

enum class RegressionPolicy { cs, eps_cs, uniform };

const char* regression_policy_name(RegressionPolicy p);
RegressionPolicy parse_regression_policy(const std::string& text);

struct RegressionOptions {
  RegressionPolicy policy = RegressionPolicy::cs;
  /// Refresh the design every `batch` rounds (1 = every round).
  std::size_t batch = 1;
  EigSolverOptions solver{200, 1e-6, std::nullopt, true, false};
  FitOptions fit;
  bool record_designs = false;
};

struct RegressionState {
  Eigen::VectorXd theta_hat;
  std::vector<ArmIndex> arms;
  std::vector<double> obs;
  ArmStats stats;
  /// relu_net keeps one warm start per output sign pattern.
  std::vector<Eigen::VectorXd> starts;
  /// Designs actually sampled from, when recorded.
  std::vector<Design> design_trace;
  /// Running sum of sampled designs (always kept).
  std::vector<double> design_sum;
  Design cached;
  bool has_cache = false;
  std::size_t last_support = 0;
  std::uint64_t non_spanning_rounds = 0;
  std::uint64_t fit_warnings = 0;

  std::size_t round() const { return arms.size(); }
};

/// Zero for linear/logistic, 0.1 * N(0, 1) entries for relu_net.
RegressionState initial_state(const ParamModel& model, Rng& rng);

/// One round: design at theta_hat, draw an arm, observe, refit.
void regression_step(RegressionState& state, const RegressionEnv& env,
                     const RegressionOptions& opts, Rng& rng);

struct RegressionMetrics {
  std::vector<std::size_t> checkpoints;
  std::vector<double> est_err;
  std::vector<double> pt_gap;
  std::vector<std::size_t> support_sizes;
  std::uint64_t non_spanning_rounds = 0;
  std::uint64_t fit_warnings = 0;
};

/// Roughly ten points per decade from 1 to `horizon`, always ending at it.
std::vector<std::size_t> checkpoint_schedule(std::size_t horizon);

RegressionMetrics run_regression(const RegressionEnv& env, const RegressionOptions& opts,
                                 std::size_t horizon, std::uint64_t seed);

}  // namespace chernoff
