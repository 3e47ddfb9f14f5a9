#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chernoff/core.hpp"
#include "chernoff/design_opt.hpp"

namespace chernoff {

/// A finite testing problem: means, noise and the hypothesis generating data.
struct TestingEnv {
  std::string name;
  MeansTable means;
  NoiseSpec noise;
  HypIndex true_hyp = 0;
};

enum class StopVariant { gaussian, sub_gaussian };

struct StoppingRule {
  double delta = 0.1;
  StopVariant variant = StopVariant::gaussian;
  double eta = 0.0;
  double eta0 = 0.0;
  double beta = 0.0;

  /// beta = log(J / delta)
  static StoppingRule gaussian(std::size_t hyp_count, double delta);
  /// beta = log((1 + eta^2 / eta0^2) J / delta); throws when eta0 == 0.
  static StoppingRule sub_gaussian(std::size_t hyp_count, double delta, double eta, double eta0);
};

/// Smallest squared mean gap over arms and distinct hypothesis pairs.
double min_squared_gap(const MeansTable& means);

enum class PolicyKind { cs, top2, batch_cs, eps_cs, uniform };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::cs;
  std::size_t batch = 1;  // batch_cs only
  std::uint64_t max_rounds = 10'000'000;
  std::uint64_t seed = 0;

  /// "cs", "top2", "batch_cs(B)", "eps_cs" or "uniform".
  std::string label() const;
  void validate() const;
};

/// Inverse of PolicyConfig::label. Throws InvalidArgument on unknown names.
PolicyConfig parse_policy(std::string_view text);

/// Verification proportion p_theta for every hypothesis. They depend on the
/// estimate only through its identity, so one table serves a whole run.
class VerificationDesigns {
 public:
  VerificationDesigns() = default;
  explicit VerificationDesigns(const MeansTable& means);

  std::size_t hyp_count() const { return solutions_.size(); }
  const Design& design(HypIndex hyp) const { return solutions_.at(hyp).design; }
  const DesignSolution& solution(HypIndex hyp) const { return solutions_.at(hyp); }
  bool degenerate(HypIndex hyp) const { return solutions_.at(hyp).degenerate; }

 private:
  std::vector<DesignSolution> solutions_;
};

/// Per-trial policy bookkeeping.
struct PolicyState {
  std::optional<HypIndex> cached_hyp;  // batch_cs: hypothesis whose design is in use
  std::uint64_t design_refreshes = 0;
  std::uint64_t degenerate_rounds = 0;
};

/// Everything a policy reads. The referenced objects must outlive the context.
struct PolicyContext {
  const MeansTable& means;
  const VerificationDesigns& designs;
};

/// Sample from the verification proportion of the current leader. An empty
/// history samples a uniform arm.
ArmIndex cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng,
                     PolicyState* state = nullptr);

/// Uniform draw among the arms that best separate leader and runner-up.
ArmIndex top2_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng);

/// CS with uniform exploration at rate 1/sqrt(t), t the round being chosen.
ArmIndex eps_cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng,
                         PolicyState* state = nullptr);

/// CS whose design is refreshed only when t mod B == 0 or no design is cached
/// yet, t being the number of observations so far.
ArmIndex batch_cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, std::size_t batch,
                           PolicyState& state, Rng& rng);

ArmIndex uniform_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng);

/// Dispatches on config.kind.
ArmIndex next_arm(const PolicyConfig& config, const TrialHistory& hist, const PolicyContext& ctx,
                  PolicyState& state, Rng& rng);

struct StopDecision {
  bool stop = false;
  HypIndex hyp = 0;
};

/// Declares the leader once every competitor trails it by more than beta.
StopDecision check_stop(const TrialHistory& hist, const StoppingRule& rule);
StopDecision check_stop(std::span<const double> losses, const StoppingRule& rule);

/// Sample, observe, update and check until a declaration or max_rounds.
TrialReport run_trial(const TestingEnv& env, const PolicyConfig& policy, const StoppingRule& rule);
TrialReport run_trial(const TestingEnv& env, const VerificationDesigns& designs,
                      const PolicyConfig& policy, const StoppingRule& rule);

/// Same loop, keeping the full history (for tests and small runs).
TrialReport run_trial_recorded(const TestingEnv& env, const VerificationDesigns& designs,
                               const PolicyConfig& policy, const StoppingRule& rule,
                               TrialHistory& hist);

}  // namespace chernoff
