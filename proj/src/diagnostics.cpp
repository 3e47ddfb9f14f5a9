#include "chernoff/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chernoff/testing.hpp"

namespace chernoff {

namespace {

double weighted_gap(const MeansTable& m, const std::vector<double>& p, HypIndex a, HypIndex b) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.arm_count(); ++i) {
    const double g = m(i, a) - m(i, b);
    s += p[i] * g * g;
  }
  return s;
}

// max_p min over all unordered hypothesis pairs of the weighted squared gap.
double all_pairs_maxmin(const MeansTable& m) {
  const std::size_t J = m.hyp_count();
  LpInstance inst;
  inst.gaps_sq.resize(static_cast<Eigen::Index>(J * (J - 1) / 2), static_cast<Eigen::Index>(m.arm_count()));
  Eigen::Index r = 0;
  for (HypIndex a = 0; a < J; ++a) {
    for (HypIndex b = a + 1; b < J; ++b, ++r) {
      for (std::size_t i = 0; i < m.arm_count(); ++i) {
        const double g = m(i, a) - m(i, b);
        inst.gaps_sq(r, static_cast<Eigen::Index>(i)) = g * g;
      }
    }
  }
  return solve_verification_lp(inst).objective;
}

}  // namespace

ProblemConstants compute_constants(const MeansTable& means, HypIndex true_hyp) {
  const std::size_t J = means.hyp_count();
  if (true_hyp >= J) throw InvalidArgument("compute_constants: hypothesis out of range");
  ProblemConstants c;
  for (HypIndex h = 0; h < J; ++h) {
    const DesignSolution s = solve_verification_lp(LpInstance::verification(means, h));
    c.per_hyp_designs.push_back(s.design);
    c.per_hyp_objectives.push_back(s.objective);
  }
  c.d0 = c.per_hyp_objectives[true_hyp];

  c.d1 = std::numeric_limits<double>::infinity();
  for (HypIndex h = 0; h < J; ++h) {
    double worst = std::numeric_limits<double>::infinity();
    for (HypIndex alt = 0; alt < J; ++alt) {
      if (alt != true_hyp) worst = std::min(worst, weighted_gap(means, c.per_hyp_designs[h].probs, alt, true_hyp));
    }
    if (worst < c.d1) {
      c.d1 = worst;
      c.d1_argmin = h;
    }
  }

  c.de = LpInstance::verification(means, true_hyp).objective(Design::uniform(means.arm_count()).probs);

  double first = std::numeric_limits<double>::infinity();
  for (HypIndex a = 0; a < J; ++a) {
    for (HypIndex b = 0; b < J; ++b) {
      if (a != b) first = std::min(first, weighted_gap(means, c.per_hyp_designs[b].probs, a, b));
    }
  }
  c.dnj = first * first * all_pairs_maxmin(means);

  c.eta0 = min_squared_gap(means);
  c.eta0_zero = !(c.eta0 > 0.0);
  const double slack = 1e-12 * std::max(1.0, c.d0);
  c.ordering_holds = c.d1 <= c.d0 + slack && c.de <= c.d0 + slack && c.dnj <= c.d1 + slack;
  return c;
}

PredictedTerms predicted_terms(const ProblemConstants& consts, std::size_t hyp_count, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("predicted_terms: delta must lie in (0, 1)");
  if (hyp_count < 2) throw InvalidArgument("predicted_terms: need at least two hypotheses");
  const double inf = std::numeric_limits<double>::infinity();
  const double lj = std::log(static_cast<double>(hyp_count));
  PredictedTerms t;
  auto term = [&](double num, double den, const char* name) {
    if (den > 0.0) return num / den;
    t.infinite.emplace_back(name);
    return inf;
  };
  t.exploration = term(lj, consts.d1, "exploration");
  t.exploitation = term(std::log(static_cast<double>(hyp_count) / delta), consts.d0, "exploitation");
  t.uniform = term(lj, consts.de, "uniform");
  return t;
}

}  // namespace chernoff
