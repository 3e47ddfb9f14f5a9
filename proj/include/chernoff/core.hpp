#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chernoff {

using Rng = std::mt19937_64;
using ArmIndex = std::size_t;
using HypIndex = std::size_t;

/// Thrown for malformed inputs (dimension mismatch, out-of-range index,
/// invalid parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a file cannot be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean rewards mu_i(theta_j) of a finite testing environment: one row per
/// arm, one column per hypothesis.
class MeansTable {
 public:
  MeansTable() = default;
  MeansTable(std::size_t arms, std::size_t hyps, std::vector<double> row_major);

  static MeansTable from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t arm_count() const { return arms_; }
  std::size_t hyp_count() const { return hyps_; }

  double operator()(ArmIndex arm, HypIndex hyp) const { return data_[arm * hyps_ + hyp]; }
  std::span<const double> row(ArmIndex arm) const {
    return {data_.data() + arm * hyps_, hyps_};
  }
  const std::vector<double>& data() const { return data_; }

  std::vector<std::vector<double>> rows() const;

 private:
  std::size_t arms_ = 0;
  std::size_t hyps_ = 0;
  std::vector<double> data_;
};

enum class NoiseKind { gaussian, bounded_uniform, truncated_gaussian };

/// Observation noise model. `eta` is the range parameter: bounded kinds
/// keep every reward inside [-sqrt(eta)/2, +sqrt(eta)/2].
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double scale = 0.7071067811865476;  // std (gaussian kinds) or half width (uniform)
  double half_range = 0.0;            // truncation for truncated_gaussian
  double eta = 8.0;
  bool eta_is_proxy = true;           // true when eta is the gaussian clipping proxy

  /// Gaussian noise; eta defaults to the diagnostic proxy 16 * std^2.
  static NoiseSpec gaussian(double stddev = 0.7071067811865476);
  static NoiseSpec gaussian_with_eta(double stddev, double eta);
  static NoiseSpec bounded_uniform(double half_width, double eta);
  static NoiseSpec truncated_gaussian(double stddev, double half_range, double eta);

  double variance() const;
  double reward_bound() const;  // sqrt(eta) / 2
  bool is_bounded() const { return kind != NoiseKind::gaussian; }
};

/// Probability mass function over arms.
struct Design {
  std::vector<double> probs;
  double support_eps = 1e-12;

  static Design uniform(std::size_t n);
  static Design point(std::size_t n, ArmIndex arm);

  std::size_t size() const { return probs.size(); }
  std::size_t support_size() const;
  std::vector<ArmIndex> support() const;

  /// Throws InvalidArgument unless entries are >= 0 and sum to 1 within 1e-9.
  void validate() const;

  /// Inverse-CDF draw using exactly one uniform variate.
  ArmIndex sample(Rng& rng) const;
};

/// Arms pulled, rewards observed and per-hypothesis sum of squared errors.
struct TrialHistory {
  std::vector<ArmIndex> arms;
  std::vector<double> obs;
  std::vector<double> cum_sq_err;
  std::uint64_t rng_seed = 0;

  TrialHistory() = default;
  TrialHistory(std::size_t hyp_count, std::uint64_t seed)
      : cum_sq_err(hyp_count, 0.0), rng_seed(seed) {}

  std::size_t round() const { return arms.size(); }
};

struct TrialReport {
  std::uint64_t stop_time = 0;
  HypIndex declared_hyp = 0;
  bool correct = false;
  bool truncated = false;
  std::vector<std::uint64_t> arm_counts;
  std::uint64_t seed = 0;
  std::uint64_t degenerate_rounds = 0;
  std::uint64_t design_refreshes = 0;
};

double uniform01(Rng& rng);
double standard_normal(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t n);

/// mu_arm(true_hyp) plus one noise draw.
double draw_reward(const MeansTable& means, HypIndex true_hyp, ArmIndex arm,
                   const NoiseSpec& noise, Rng& rng);

/// Draws one noise sample (mean zero) and applies the reward bound to
/// `mean + noise` for bounded kinds.
double draw_observation(double mean, const NoiseSpec& noise, Rng& rng);

/// Appends (arm, obs) and adds (obs - mu_arm(j))^2 to every hypothesis.
void update_losses(TrialHistory& hist, const MeansTable& means, ArmIndex arm, double obs);

/// Leader and runner-up of cum_sq_err, ties broken uniformly at random.
std::pair<HypIndex, HypIndex> most_likely(const TrialHistory& hist, Rng& rng);

/// Same as most_likely over an explicit loss vector.
std::pair<HypIndex, HypIndex> most_likely(std::span<const double> losses, Rng& rng);

/// 64-bit mixing used to derive independent per-trial seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index);

}  // namespace chernoff
