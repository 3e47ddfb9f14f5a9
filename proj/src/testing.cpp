#include "chernoff/testing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace chernoff {

StoppingRule StoppingRule::gaussian(std::size_t hyp_count, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (hyp_count < 2) throw InvalidArgument("stopping rule needs at least two hypotheses");
  StoppingRule r;
  r.delta = delta;
  r.variant = StopVariant::gaussian;
  r.beta = std::log(static_cast<double>(hyp_count) / delta);
  return r;
}

StoppingRule StoppingRule::sub_gaussian(std::size_t hyp_count, double delta, double eta,
                                        double eta0) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (hyp_count < 2) throw InvalidArgument("stopping rule needs at least two hypotheses");
  if (!(eta > 0.0)) throw InvalidArgument("sub_gaussian rule: eta must be > 0");
  if (!(eta0 > 0.0)) {
    throw InvalidArgument("sub_gaussian rule: eta0 is 0 (two hypotheses share a mean on some arm); "
                          "use the gaussian rule or eps_cs");
  }
  StoppingRule r;
  r.delta = delta;
  r.variant = StopVariant::sub_gaussian;
  r.eta = eta;
  r.eta0 = eta0;
  r.beta = std::log((1.0 + (eta * eta) / (eta0 * eta0)) * static_cast<double>(hyp_count) / delta);
  return r;
}

double min_squared_gap(const MeansTable& means) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < means.arm_count(); ++i) {
    const auto row = means.row(i);
    for (std::size_t a = 0; a < row.size(); ++a) {
      for (std::size_t b = a + 1; b < row.size(); ++b) {
        const double g = row[a] - row[b];
        best = std::min(best, g * g);
      }
    }
  }
  return best;
}

std::string PolicyConfig::label() const {
  switch (kind) {
    case PolicyKind::cs: return "cs";
    case PolicyKind::top2: return "top2";
    case PolicyKind::batch_cs: return "batch_cs(" + std::to_string(batch) + ")";
    case PolicyKind::eps_cs: return "eps_cs";
    case PolicyKind::uniform: return "uniform";
  }
  return "unknown";
}

void PolicyConfig::validate() const {
  if (kind == PolicyKind::batch_cs && batch < 1) throw InvalidArgument("batch_cs: B must be >= 1");
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be >= 1");
}

PolicyConfig parse_policy(std::string_view text) {
  PolicyConfig p;
  if (text == "cs") {
    p.kind = PolicyKind::cs;
  } else if (text == "top2") {
    p.kind = PolicyKind::top2;
  } else if (text == "eps_cs") {
    p.kind = PolicyKind::eps_cs;
  } else if (text == "uniform") {
    p.kind = PolicyKind::uniform;
  } else if (text.starts_with("batch_cs(") && text.ends_with(")")) {
    const std::string_view num = text.substr(9, text.size() - 10);
    std::size_t b = 0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), b);
    if (ec != std::errc() || ptr != num.data() + num.size() || b < 1) {
      throw InvalidArgument("bad batch size in policy '" + std::string(text) + "'");
    }
    p.kind = PolicyKind::batch_cs;
    p.batch = b;
  } else {
    throw InvalidArgument("unknown policy '" + std::string(text) + "'");
  }
  return p;
}

VerificationDesigns::VerificationDesigns(const MeansTable& means) {
  solutions_.reserve(means.hyp_count());
  for (HypIndex h = 0; h < means.hyp_count(); ++h) {
    solutions_.push_back(solve_verification_lp(LpInstance::verification(means, h)));
  }
}

namespace {

// Policies only read the loss vector and the round counter, so the trial
// loop can run them without storing the full history.
struct LossView {
  std::span<const double> losses;
  std::size_t round;
};

LossView view_of(const TrialHistory& h) { return {h.cum_sq_err, h.round()}; }

ArmIndex cs_arm(LossView v, const PolicyContext& ctx, Rng& rng, PolicyState* state) {
  const std::size_t n = ctx.means.arm_count();
  if (v.round == 0) return uniform_index(rng, n);
  const HypIndex lead = most_likely(v.losses, rng).first;
  if (state) {
    ++state->design_refreshes;
    if (ctx.designs.degenerate(lead)) ++state->degenerate_rounds;
  }
  return ctx.designs.design(lead).sample(rng);
}

ArmIndex top2_arm(LossView v, const PolicyContext& ctx, Rng& rng) {
  const std::size_t n = ctx.means.arm_count();
  if (v.round == 0) return uniform_index(rng, n);
  const auto [lead, runner] = most_likely(v.losses, rng);
  double best = -1.0;
  std::size_t ties = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = ctx.means(i, lead) - ctx.means(i, runner);
    const double g2 = g * g;
    if (g2 > best) {
      best = g2;
      ties = 1;
    } else if (g2 == best) {
      ++ties;
    }
  }
  std::size_t k = uniform_index(rng, ties);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = ctx.means(i, lead) - ctx.means(i, runner);
    if (g * g == best) {
      if (k == 0) return i;
      --k;
    }
  }
  return n - 1;
}

ArmIndex eps_cs_arm(LossView v, const PolicyContext& ctx, Rng& rng, PolicyState* state) {
  const double t = static_cast<double>(v.round + 1);
  const double u = uniform01(rng);
  if (u < 1.0 / std::sqrt(t)) return uniform_index(rng, ctx.means.arm_count());
  return cs_arm(v, ctx, rng, state);
}

ArmIndex batch_arm(LossView v, const PolicyContext& ctx, std::size_t batch, PolicyState& state,
                   Rng& rng) {
  if (batch < 1) throw InvalidArgument("batch_cs: B must be >= 1");
  if (v.round == 0) return uniform_index(rng, ctx.means.arm_count());
  if (!state.cached_hyp || v.round % batch == 0) {
    state.cached_hyp = most_likely(v.losses, rng).first;
    ++state.design_refreshes;
  }
  if (ctx.designs.degenerate(*state.cached_hyp)) ++state.degenerate_rounds;
  return ctx.designs.design(*state.cached_hyp).sample(rng);
}

ArmIndex dispatch(const PolicyConfig& config, LossView v, const PolicyContext& ctx,
                  PolicyState& state, Rng& rng) {
  switch (config.kind) {
    case PolicyKind::cs: return cs_arm(v, ctx, rng, &state);
    case PolicyKind::top2: return top2_arm(v, ctx, rng);
    case PolicyKind::batch_cs: return batch_arm(v, ctx, config.batch, state, rng);
    case PolicyKind::eps_cs: return eps_cs_arm(v, ctx, rng, &state);
    case PolicyKind::uniform: return uniform_index(rng, ctx.means.arm_count());
  }
  return 0;
}

void check_context(const PolicyContext& ctx, std::size_t losses) {
  if (ctx.designs.hyp_count() != ctx.means.hyp_count() || losses != ctx.means.hyp_count()) {
    throw InvalidArgument("policy: hypothesis counts of history, means and designs differ");
  }
}

}  // namespace

ArmIndex cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng,
                     PolicyState* state) {
  check_context(ctx, hist.cum_sq_err.size());
  return cs_arm(view_of(hist), ctx, rng, state);
}

ArmIndex top2_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng) {
  check_context(ctx, hist.cum_sq_err.size());
  return top2_arm(view_of(hist), ctx, rng);
}

ArmIndex eps_cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, Rng& rng,
                         PolicyState* state) {
  check_context(ctx, hist.cum_sq_err.size());
  return eps_cs_arm(view_of(hist), ctx, rng, state);
}

ArmIndex batch_cs_next_arm(const TrialHistory& hist, const PolicyContext& ctx, std::size_t batch,
                           PolicyState& state, Rng& rng) {
  check_context(ctx, hist.cum_sq_err.size());
  return batch_arm(view_of(hist), ctx, batch, state, rng);
}

ArmIndex uniform_next_arm(const TrialHistory&, const PolicyContext& ctx, Rng& rng) {
  return uniform_index(rng, ctx.means.arm_count());
}

ArmIndex next_arm(const PolicyConfig& config, const TrialHistory& hist, const PolicyContext& ctx,
                  PolicyState& state, Rng& rng) {
  check_context(ctx, hist.cum_sq_err.size());
  return dispatch(config, view_of(hist), ctx, state, rng);
}

StopDecision check_stop(std::span<const double> losses, const StoppingRule& rule) {
  if (losses.size() < 2) return {};
  std::size_t lead = 0;
  for (std::size_t j = 1; j < losses.size(); ++j) {
    if (losses[j] < losses[lead]) lead = j;
  }
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (j != lead && !(losses[j] - losses[lead] > rule.beta)) return {};
  }
  return {true, lead};
}

StopDecision check_stop(const TrialHistory& hist, const StoppingRule& rule) {
  if (hist.round() == 0) return {};
  return check_stop(std::span<const double>(hist.cum_sq_err), rule);
}

namespace {

template <bool Record>
TrialReport run_loop(const TestingEnv& env, const VerificationDesigns& designs,
                     const PolicyConfig& policy, const StoppingRule& rule, TrialHistory* hist) {
  policy.validate();
  const MeansTable& m = env.means;
  if (env.true_hyp >= m.hyp_count()) throw InvalidArgument("run_trial: true hypothesis out of range");
  if (designs.hyp_count() != m.hyp_count()) throw InvalidArgument("run_trial: design table mismatch");
  const std::size_t n = m.arm_count();
  const std::size_t J = m.hyp_count();

  Rng rng(policy.seed);
  const PolicyContext ctx{m, designs};
  PolicyState state;
  std::vector<double> losses(J, 0.0);
  TrialReport rep;
  rep.seed = policy.seed;
  rep.arm_counts.assign(n, 0);

  if constexpr (Record) *hist = TrialHistory(J, policy.seed);

  std::size_t t = 0;
  StopDecision dec;
  while (t < policy.max_rounds) {
    const ArmIndex arm = dispatch(policy, LossView{losses, t}, ctx, state, rng);
    const double y = draw_observation(m(arm, env.true_hyp), env.noise, rng);
    const auto row = m.row(arm);
    for (std::size_t j = 0; j < J; ++j) {
      const double r = y - row[j];
      losses[j] += r * r;
    }
    if constexpr (Record) {
      hist->arms.push_back(arm);
      hist->obs.push_back(y);
    }
    ++rep.arm_counts[arm];
    ++t;
    dec = check_stop(losses, rule);
    if (dec.stop) break;
  }
  if constexpr (Record) hist->cum_sq_err = losses;

  rep.stop_time = t;
  rep.truncated = !dec.stop;
  if (dec.stop) {
    rep.declared_hyp = dec.hyp;
  } else {
    rep.declared_hyp = static_cast<HypIndex>(
        std::min_element(losses.begin(), losses.end()) - losses.begin());
  }
  rep.correct = rep.declared_hyp == env.true_hyp;
  rep.degenerate_rounds = state.degenerate_rounds;
  rep.design_refreshes = state.design_refreshes;
  return rep;
}

}  // namespace

TrialReport run_trial(const TestingEnv& env, const VerificationDesigns& designs,
                      const PolicyConfig& policy, const StoppingRule& rule) {
  return run_loop<false>(env, designs, policy, rule, nullptr);
}

TrialReport run_trial(const TestingEnv& env, const PolicyConfig& policy, const StoppingRule& rule) {
  const VerificationDesigns designs(env.means);
  return run_trial(env, designs, policy, rule);
}

TrialReport run_trial_recorded(const TestingEnv& env, const VerificationDesigns& designs,
                               const PolicyConfig& policy, const StoppingRule& rule,
                               TrialHistory& hist) {
  return run_loop<true>(env, designs, policy, rule, &hist);
}

}  // namespace chernoff
