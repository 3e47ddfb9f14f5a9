#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "chernoff/envs.hpp"
#include "chernoff/testing.hpp"

using namespace chernoff;

namespace {

TrialHistory with_losses(std::vector<double> losses, std::size_t rounds) {
  TrialHistory h(losses.size(), 0);
  h.cum_sq_err = std::move(losses);
  h.arms.assign(rounds, 0);
  h.obs.assign(rounds, 0.0);
  return h;
}

std::vector<std::size_t> tally(std::size_t n, int draws, auto&& pick) {
  std::vector<std::size_t> counts(n, 0);
  for (int k = 0; k < draws; ++k) ++counts[pick()];
  return counts;
}

}  // namespace

TEST_CASE("stopping thresholds") {
  CHECK(StoppingRule::gaussian(3, 0.1).beta == doctest::Approx(std::log(30.0)));
  CHECK(StoppingRule::gaussian(3, 0.1).beta == doctest::Approx(3.401).epsilon(1e-3));
  const StoppingRule s = StoppingRule::sub_gaussian(3, 0.1, 2.0, 1.0);
  CHECK(s.beta == doctest::Approx(std::log(5.0 * 30.0)));
  CHECK_THROWS_AS(StoppingRule::sub_gaussian(3, 0.1, 2.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(StoppingRule::gaussian(3, 0.0), InvalidArgument);
  CHECK_THROWS_AS(StoppingRule::gaussian(3, 1.0), InvalidArgument);
  CHECK_THROWS_AS(StoppingRule::gaussian(1, 0.1), InvalidArgument);
}

TEST_CASE("check_stop") {
  StoppingRule r;
  r.beta = 2.3;
  CHECK(check_stop(with_losses({0.0, 10.0}, 1), r).stop);
  CHECK(check_stop(with_losses({0.0, 10.0}, 1), r).hyp == 0);
  CHECK_FALSE(check_stop(with_losses({0.0, 1.0}, 1), r).stop);
  CHECK(check_stop(with_losses({5.0, 0.5, 4.0}, 3), r).hyp == 1);
  CHECK_FALSE(check_stop(with_losses({5.0, 0.5, 2.0}, 3), r).stop);
  CHECK_FALSE(check_stop(with_losses({0.0, 10.0}, 0), r).stop);

  // growing every gap keeps the declaration
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> l{uniform01(rng) * 10, uniform01(rng) * 10, uniform01(rng) * 10};
    const StopDecision d = check_stop(std::span<const double>(l), r);
    if (!d.stop) continue;
    for (std::size_t j = 0; j < l.size(); ++j) {
      if (j != d.hyp) l[j] += uniform01(rng);
    }
    const StopDecision e = check_stop(std::span<const double>(l), r);
    CHECK(e.stop);
    CHECK(e.hyp == d.hyp);
  }
}

TEST_CASE("min squared gap") {
  CHECK(min_squared_gap(MeansTable::from_rows({{1.0, 0.5, 0.0}})) == doctest::Approx(0.25));
  CHECK(min_squared_gap(MeansTable::from_rows({{1.0, 1.0}, {0.0, 2.0}})) == 0.0);
}

TEST_CASE("policy labels round-trip") {
  for (const char* s : {"cs", "top2", "eps_cs", "uniform", "batch_cs(10)"}) {
    CHECK(parse_policy(s).label() == s);
  }
  CHECK(parse_policy("batch_cs(7)").batch == 7);
  CHECK_THROWS_AS(parse_policy("batch_cs(0)"), InvalidArgument);
  CHECK_THROWS_AS(parse_policy("batch_cs(x)"), InvalidArgument);
  CHECK_THROWS_AS(parse_policy("chernoff"), InvalidArgument);
}

TEST_CASE("cs follows the verification design of the leader") {
  const TestingEnv env = build_example1();
  const VerificationDesigns designs(env.means);
  const PolicyContext ctx{env.means, designs};
  Rng rng(1);
  const TrialHistory at_truth = with_losses({0.0, 5.0, 5.0}, 3);
  const TrialHistory at_alt = with_losses({5.0, 0.0, 5.0}, 3);
  for (int k = 0; k < 1000; ++k) {
    CHECK(cs_next_arm(at_truth, ctx, rng) == 0);
    CHECK(cs_next_arm(at_alt, ctx, rng) == 1);
  }

  // two hypotheses that differ on one arm only
  const MeansTable m = MeansTable::from_rows({{1.0, 1.0}, {0.0, 0.0}, {0.5, 2.0}, {3.0, 3.0}});
  const VerificationDesigns d2(m);
  const PolicyContext c2{m, d2};
  const TrialHistory h = with_losses({0.0, 1.0}, 1);
  for (int k = 0; k < 200; ++k) CHECK(cs_next_arm(h, c2, rng) == 2);
}

TEST_CASE("first round is uniform") {
  const TestingEnv env = build_example1();
  const VerificationDesigns designs(env.means);
  const PolicyContext ctx{env.means, designs};
  const TrialHistory empty(3, 0);
  Rng rng(9);
  const auto c = tally(2, 10000, [&] { return cs_next_arm(empty, ctx, rng); });
  CHECK(c[0] == doctest::Approx(5000).epsilon(0.05));
}

TEST_CASE("top2 picks the arm separating leader and runner-up") {
  const TestingEnv env = build_three_group(5);
  const VerificationDesigns designs(env.means);
  const PolicyContext ctx{env.means, designs};
  Rng rng(2);
  // leader 0, runner-up 2
  const TrialHistory h = with_losses({0.0, 9.0, 1.0, 9.0, 9.0, 9.0}, 5);
  for (int k = 0; k < 100; ++k) CHECK(top2_next_arm(h, ctx, rng) == 0);

  const MeansTable ties = MeansTable::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.2, 0.1}});
  const VerificationDesigns dt(ties);
  const PolicyContext ct{ties, dt};
  const TrialHistory ht = with_losses({0.0, 1.0}, 1);
  const auto c = tally(3, 10000, [&] { return top2_next_arm(ht, ct, rng); });
  CHECK(c[2] == 0);
  CHECK(c[0] / 10000.0 == doctest::Approx(0.5).epsilon(0.1));

  const MeansTable one = MeansTable::from_rows({{1.0, 1.0}, {0.0, 0.0}, {0.0, 0.3}});
  const VerificationDesigns d1(one);
  const PolicyContext c1{one, d1};
  for (int k = 0; k < 100; ++k) CHECK(top2_next_arm(ht, c1, rng) == 2);
}

TEST_CASE("eps_cs exploration rate") {
  const TestingEnv env = build_example1();
  const VerificationDesigns designs(env.means);
  const PolicyContext ctx{env.means, designs};
  Rng rng(3);
  // t = 1 is fully uniform whatever the leader
  const TrialHistory first(3, 0);
  const auto c1 = tally(2, 10000, [&] { return eps_cs_next_arm(first, ctx, rng); });
  CHECK(c1[1] / 10000.0 == doctest::Approx(0.5).epsilon(0.05));

  // t = 10^6 at the truth: P(arm 0) = 1 - 1/1000 + 1/2000
  const TrialHistory late = with_losses({0.0, 5.0, 5.0}, 999999);
  const auto c = tally(2, 10000, [&] { return eps_cs_next_arm(late, ctx, rng); });
  CHECK(c[0] / 10000.0 >= 0.998);

  // exploration count over rounds 1..T against sum 1/sqrt(t); arm 1 is only
  // reached by exploring, half of the time
  const std::size_t T = 20000;
  double expect = 0.0, var = 0.0;
  std::size_t hits = 0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double e = 0.5 / std::sqrt(static_cast<double>(t));
    expect += e;
    var += e * (1.0 - e);
    const TrialHistory h = with_losses({0.0, 5.0, 5.0}, t - 1);
    if (t > 1 && eps_cs_next_arm(h, ctx, rng) == 1) ++hits;
  }
  expect -= 0.5;
  CHECK(std::abs(static_cast<double>(hits) - expect) <= 3.0 * std::sqrt(var));
}

TEST_CASE("batch_cs caching") {
  const TestingEnv env = build_three_group(1);
  const VerificationDesigns designs(env.means);
  const PolicyContext ctx{env.means, designs};
  Rng rng(5);
  PolicyState st;
  TrialHistory h = with_losses({0.0, 9.0, 9.0, 9.0, 9.0, 9.0}, 1);
  batch_cs_next_arm(h, ctx, 10, st, rng);
  CHECK(st.design_refreshes == 1);
  for (std::size_t t = 2; t < 10; ++t) {
    h = with_losses({9.0, 0.0, 9.0, 9.0, 9.0, 9.0}, t);
    batch_cs_next_arm(h, ctx, 10, st, rng);
  }
  CHECK(st.design_refreshes == 1);
  CHECK(*st.cached_hyp == 0);
  h = with_losses({9.0, 0.0, 9.0, 9.0, 9.0, 9.0}, 10);
  batch_cs_next_arm(h, ctx, 10, st, rng);
  CHECK(st.design_refreshes == 2);
  CHECK(*st.cached_hyp == 1);
  CHECK_THROWS_AS(batch_cs_next_arm(h, ctx, 0, st, rng), InvalidArgument);
}

TEST_CASE("batch_cs with B = 1 reproduces cs") {
  const TestingEnv env = build_three_group(2);
  const VerificationDesigns designs(env.means);
  const StoppingRule rule = StoppingRule::gaussian(6, 0.1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PolicyConfig cs{PolicyKind::cs, 1, 100000, seed};
    PolicyConfig b1{PolicyKind::batch_cs, 1, 100000, seed};
    TrialHistory ha, hb;
    const TrialReport ra = run_trial_recorded(env, designs, cs, rule, ha);
    const TrialReport rb = run_trial_recorded(env, designs, b1, rule, hb);
    CHECK(ha.arms == hb.arms);
    CHECK(ha.obs == hb.obs);
    CHECK(ra.stop_time == rb.stop_time);
  }
}

TEST_CASE("run_trial on a noiseless environment") {
  TestingEnv env;
  env.means = MeansTable::from_rows({{1.0, 0.0, 0.5}, {0.0, 1.0, 0.2}});
  env.noise = NoiseSpec::gaussian(0.0);
  env.true_hyp = 2;
  const StoppingRule rule = StoppingRule::gaussian(3, 0.1);
  for (const char* p : {"cs", "top2", "eps_cs", "uniform", "batch_cs(3)"}) {
    PolicyConfig cfg = parse_policy(p);
    cfg.seed = 8;
    TrialHistory h;
    const TrialReport r = run_trial_recorded(env, VerificationDesigns(env.means), cfg, rule, h);
    CHECK(r.correct);
    CHECK_FALSE(r.truncated);
    // the loop stops at the first round where every gap exceeds beta
    TrialHistory replay(3, 0);
    std::size_t first = 0;
    for (std::size_t t = 0; t < h.arms.size(); ++t) {
      update_losses(replay, env.means, h.arms[t], h.obs[t]);
      if (!first && check_stop(replay, rule).stop) first = t + 1;
    }
    CHECK(first == r.stop_time);
    std::uint64_t total = 0;
    for (auto c : r.arm_counts) total += c;
    CHECK(total == r.stop_time);
  }
}

TEST_CASE("truncation is reported") {
  const TestingEnv env = build_example1();
  PolicyConfig cfg{PolicyKind::cs, 1, 5, 3};
  const TrialReport r = run_trial(env, cfg, StoppingRule::gaussian(3, 1e-9));
  CHECK(r.truncated);
  CHECK(r.stop_time == 5);
}

TEST_CASE("trials are deterministic") {
  const TestingEnv env = build_three_group(3);
  const VerificationDesigns designs(env.means);
  const StoppingRule rule = StoppingRule::gaussian(6, 0.1);
  for (const char* p : {"cs", "top2", "eps_cs", "uniform", "batch_cs(5)"}) {
    PolicyConfig cfg = parse_policy(p);
    cfg.seed = 77;
    const TrialReport a = run_trial(env, designs, cfg, rule);
    const TrialReport b = run_trial(env, designs, cfg, rule);
    CHECK(a.stop_time == b.stop_time);
    CHECK(a.arm_counts == b.arm_counts);
    CHECK(a.declared_hyp == b.declared_hyp);
  }
}

TEST_CASE("uniform arm counts concentrate") {
  const TestingEnv env = build_minimax(4, 0, 1.0, 1);
  const VerificationDesigns designs(env.means);
  const StoppingRule rule = StoppingRule::gaussian(4, 0.1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    PolicyConfig cfg{PolicyKind::uniform, 1, 1000000, seed};
    const TrialReport r = run_trial(env, designs, cfg, rule);
    const auto [lo, hi] = std::minmax_element(r.arm_counts.begin(), r.arm_counts.end());
    CHECK(static_cast<double>(*hi - *lo) <= 5.0 * std::sqrt(static_cast<double>(r.stop_time)));
  }
}

TEST_CASE("example 1 error rate and ordering") {
  const TestingEnv env = build_example1();
  const VerificationDesigns designs(env.means);
  const StoppingRule rule = StoppingRule::gaussian(3, 0.1);
  double cs_sum = 0.0, uni_sum = 0.0, b5_sum = 0.0;
  int cs_err = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const TrialReport c = run_trial(env, designs, {PolicyKind::cs, 1, 10000000, derive_seed(1, "cs", k)}, rule);
    const TrialReport u = run_trial(env, designs, {PolicyKind::uniform, 1, 10000000, derive_seed(1, "uniform", k)}, rule);
    const TrialReport b = run_trial(env, designs, {PolicyKind::batch_cs, 5, 10000000, derive_seed(1, "batch_cs(5)", k)}, rule);
    cs_sum += static_cast<double>(c.stop_time);
    uni_sum += static_cast<double>(u.stop_time);
    b5_sum += static_cast<double>(b.stop_time);
    cs_err += c.correct ? 0 : 1;
  }
  CHECK(cs_err <= 10);
  CHECK(uni_sum < cs_sum);
  CHECK(b5_sum <= 2.0 * cs_sum);
  CHECK(cs_sum <= 2.0 * b5_sum);
}
