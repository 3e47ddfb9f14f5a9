#pragma once

#include <string>
#include <vector>

#include "chernoff/core.hpp"
#include "chernoff/design_opt.hpp"

namespace chernoff {

struct ProblemConstants {
  double d0 = 0.0;    // max-min gap under the truth's verification design
  double d1 = 0.0;    // worst gap to the truth over all verification designs
  double de = 0.0;    // worst gap to the truth under uniform sampling
  double dnj = 0.0;   // two-phase constant, literal formula
  double eta0 = 0.0;  // smallest squared mean gap over arms and hypothesis pairs
  std::vector<Design> per_hyp_designs;
  std::vector<double> per_hyp_objectives;
  /// Hypothesis whose verification design attains d1.
  HypIndex d1_argmin = 0;
  bool eta0_zero = false;
  /// dnj <= d1 <= d0 and de <= d0.
  bool ordering_holds = true;
};

ProblemConstants compute_constants(const MeansTable& means, HypIndex true_hyp);

struct PredictedTerms {
  double exploration = 0.0;   // log(J) / d1
  double exploitation = 0.0;  // log(J / delta) / d0
  double uniform = 0.0;       // log(J) / de
  /// Names of terms that divided by a zero constant (reported as infinity).
  std::vector<std::string> infinite;
};

/// Scaling terms without constant factors.
PredictedTerms predicted_terms(const ProblemConstants& consts, std::size_t hyp_count, double delta);

}  // namespace chernoff
