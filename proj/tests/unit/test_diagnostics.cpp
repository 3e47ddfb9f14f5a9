#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "chernoff/diagnostics.hpp"
#include "chernoff/envs.hpp"

using namespace chernoff;

TEST_CASE("example 1 constants") {
  const TestingEnv env = build_example1();
  const ProblemConstants c = compute_constants(env.means, 0);
  CHECK(c.d0 == doctest::Approx(0.998001).epsilon(1e-12));
  CHECK(c.per_hyp_designs[0].probs[0] == doctest::Approx(1.0));
  // uniform: min over alternatives of the averaged gaps
  const double de_alt1 = 0.5 * (0.999 * 0.999 + 0.002 * 0.002);
  const double de_alt2 = 0.5 * (1.0 + 0.002 * 0.002);
  CHECK(c.de == doctest::Approx(std::min(de_alt1, de_alt2)));
  CHECK(c.d1 <= c.d0);
  CHECK(c.d1 > 0.0);
  CHECK(c.ordering_holds);
  CHECK_FALSE(c.eta0_zero);
  CHECK(c.eta0 == doctest::Approx(1e-6));

  const PredictedTerms t = predicted_terms(c, 3, 0.1);
  CHECK(t.exploitation == doctest::Approx(std::log(30.0) / 0.998001));
  CHECK(t.exploitation == doctest::Approx(3.4).epsilon(0.05));
  CHECK(t.uniform == doctest::Approx(std::log(3.0) / c.de));
  CHECK(t.uniform == doctest::Approx(2.1).epsilon(0.05));
  CHECK(t.infinite.empty());
}

TEST_CASE("minimax constants") {
  for (std::size_t J = 4; J <= 8; ++J) {
    const double gamma = 1.5;
    const TestingEnv env = build_minimax(J, 0, gamma, J);
    const ProblemConstants c = compute_constants(env.means, 0);
    CHECK(c.d0 == doctest::Approx(gamma * gamma / static_cast<double>(J * J)));
    for (const Design& p : c.per_hyp_designs) CHECK(p.probs[0] == doctest::Approx(1.0));
    CHECK(c.ordering_holds);
  }
  const ProblemConstants c4 = compute_constants(build_minimax(4, 0, 1.0, 1).means, 0);
  CHECK(c4.d0 == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("duplicated hypothesis column") {
  const MeansTable m = MeansTable::from_rows({{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}});
  const ProblemConstants c = compute_constants(m, 1);
  CHECK(c.eta0 == 0.0);
  CHECK(c.eta0_zero);
  CHECK(c.d1 == 0.0);
  const PredictedTerms t = predicted_terms(c, 3, 0.1);
  CHECK(std::isinf(t.exploration));
  REQUIRE(t.infinite.size() == 3);
  CHECK(t.infinite[0] == "exploration");
  // a truth outside the duplicated pair keeps d1 positive
  CHECK(compute_constants(m, 0).d1 > 0.0);
}

TEST_CASE("constants agree with the LP and uniform objectives") {
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 2 + k % 4, J = 2 + k % 3;
    std::vector<double> flat(n * J);
    for (double& v : flat) v = standard_normal(rng);
    const MeansTable m(n, J, flat);
    const HypIndex truth = static_cast<HypIndex>(k % J);
    const ProblemConstants c = compute_constants(m, truth);
    const LpInstance inst = LpInstance::verification(m, truth);
    CHECK(std::abs(c.d0 - solve_verification_lp(inst).objective) <= 1e-8);
    CHECK(c.de == inst.objective(Design::uniform(n).probs));
    CHECK(c.d1 <= c.d0 + 1e-12);
    CHECK(c.de <= c.d0 + 1e-12);
    CHECK(c.dnj >= 0.0);
    if (c.d1 > 0.0) CHECK(c.ordering_holds == (c.dnj <= c.d1 + 1e-12 * std::max(1.0, c.d0)));
    // d1 is attained by the reported hypothesis
    const double at = inst.objective(c.per_hyp_designs[c.d1_argmin].probs);
    CHECK(at == doctest::Approx(c.d1));
  }
}

TEST_CASE("predicted terms over a delta sweep") {
  const ProblemConstants c = compute_constants(build_minimax(5, 0, 1.0, 2).means, 0);
  const PredictedTerms base = predicted_terms(c, 5, 0.1);
  for (double delta : {1e-2, 1e-4, 1e-8}) {
    const PredictedTerms t = predicted_terms(c, 5, delta);
    CHECK(t.exploration == base.exploration);
    CHECK(t.exploitation - base.exploitation == doctest::Approx(std::log(0.1 / delta) / c.d0));
  }
  CHECK_THROWS_AS(predicted_terms(c, 5, 0.0), InvalidArgument);
  CHECK_THROWS_AS(predicted_terms(c, 1, 0.1), InvalidArgument);
  CHECK_THROWS_AS(compute_constants(build_example1().means, 3), InvalidArgument);
}
