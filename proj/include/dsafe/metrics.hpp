#pragma once

#include <vector>

#include "dsafe/losses.hpp"
#include "dsafe/optimizer.hpp"

namespace dsafe {

/// Per-agent regret against the global minimizer sequence, with the
/// three-term phase decomposition when the shrunk comparator is recorded.
struct RegretReport {
  int T = 0;
  int m = 0;
  double path_length = 0.0;  // C_T*
  std::vector<double> regret;  // per agent: sum_t f_t(x_{j,t}) - f_t(x*_t)
  std::vector<double> term_exploration;  // rounds before the optimization start
  std::vector<double> term_tracking;     // optimization rounds vs shrunk comparator
  std::vector<double> term_comparator;   // shrunk vs true comparator gap
  bool decomposition_available = false;
  double decomposition_gap = 0.0;  // max_j |I + II + III - total|

  long violation_count = 0;
  double worst_slack = 0.0;
  double max_disagreement = 0.0;       // over optimization rounds
  double max_deviation = 0.0;          // shadow runs only
  double disagreement_kappa = 0.0;     // fitted constant, heterogeneous-set runs
  double radius = 0.0;                 // B_r
  double tau_in = 0.0;
};

/// Evaluates the global loss at every agent's action and at the comparator
/// sequence; sums over the full horizon including the estimation phase.
RegretReport compute_regret(const RunRecord& record, const MinimizerTrace& trace);

struct SafetyAudit {
  long violations = 0;
  double worst_slack = 0.0;
};

/// Counts actions with any true-constraint slack below -1e-9; recomputed
/// from the recorded actions, not the cached slacks.
SafetyAudit safety_audit(const RunRecord& record, const Polytope& truth);

/// Fills trace.x_tilde with projections of x*_t onto the polytope shrunk by
/// tau_in. Throws EmptyShrunkSet when the tightened set is empty.
void attach_shrunk_comparators(MinimizerTrace& trace, const Polytope& truth,
                               double tau_in);

/// Ordinary least squares on (log x, log y) with the 95% slope interval.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double ci_halfwidth = 0.0;
};

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dsafe
