#include "dsafe/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dsafe {

namespace {

constexpr double kViolationSlack = -1e-9;

// two-sided 97.5% Student-t quantiles for small residual degrees of freedom
double t_quantile_975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365,  2.306, 2.262, 2.228, 2.201, 2.179};
  if (dof < 1) return 0.0;
  if (dof <= 12) return table[dof - 1];
  return 1.96 + 2.4 / dof;
}

}  // namespace

RegretReport compute_regret(const RunRecord& record, const MinimizerTrace& trace) {
  if (trace.horizon() != record.T)
    throw Error(ErrorCode::HorizonMismatch,
                "trace and record cover different horizons");
  const Scenario& scenario = *record.scenario;
  const int T = record.T;
  const int m = record.m;
  const int start = record.optimization_start;
  const bool shrunk = !trace.x_tilde.empty();

  RegretReport report;
  report.T = T;
  report.m = m;
  report.path_length = path_length(trace);
  report.decomposition_available = shrunk;
  report.radius = record.radius;
  report.tau_in = trace.tau_in;
  report.regret.assign(m, 0.0);
  report.term_exploration.assign(m, 0.0);
  report.term_tracking.assign(m, 0.0);
  report.term_comparator.assign(m, 0.0);

  for (int t = 0; t < T; ++t) {
    const double f_star = scenario.losses.global_value(t, trace.x_star[t]);
    const double f_tilde =
        shrunk ? scenario.losses.global_value(t, trace.x_tilde[t]) : f_star;
    for (int j = 0; j < m; ++j) {
      const double at_action = record.global_loss(t, j);
      report.regret[j] += at_action - f_star;
      if (t < start) {
        report.term_exploration[j] += at_action - f_star;
      } else {
        report.term_tracking[j] += at_action - f_tilde;
        report.term_comparator[j] += f_tilde - f_star;
      }
    }
  }

  for (int j = 0; j < m; ++j) {
    double recombined = report.term_exploration[j] + report.term_tracking[j] +
                        report.term_comparator[j];
    report.decomposition_gap =
        std::max(report.decomposition_gap, std::abs(recombined - report.regret[j]));
  }

  report.worst_slack = record.slack.minCoeff();
  report.violation_count =
      (record.slack.array() < kViolationSlack).count();
  for (int t = start; t < T; ++t) {
    report.max_disagreement = std::max(report.max_disagreement, record.disagreement[t]);
    report.max_deviation = std::max(report.max_deviation, record.deviation[t]);
  }
  if (!record.common_set && record.beta > 0.0) {
    const double scale = (record.eta + record.radius) * std::sqrt(double(m)) *
                         record.beta / (1.0 - record.beta);
    if (scale > 0.0) report.disagreement_kappa = report.max_disagreement / scale;
  }
  return report;
}

SafetyAudit safety_audit(const RunRecord& record, const Polytope& truth) {
  SafetyAudit audit;
  audit.worst_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < record.T; ++t)
    for (int i = 0; i < record.m; ++i) {
      double slack =
          (truth.b - truth.A * record.actions[t].row(i).transpose()).minCoeff();
      audit.worst_slack = std::min(audit.worst_slack, slack);
      if (slack < kViolationSlack) ++audit.violations;
    }
  return audit;
}

void attach_shrunk_comparators(MinimizerTrace& trace, const Polytope& truth,
                               double tau_in) {
  Polytope shrunk = shrink_polytope(truth, tau_in);
  trace.tau_in = tau_in;
  trace.x_tilde.clear();
  trace.x_tilde.reserve(trace.x_star.size());
  for (const auto& x : trace.x_star)
    trace.x_tilde.push_back(project_polytope(shrunk, x, 1e-11));
}

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  const int k = static_cast<int>(x.size());
  if (k < 2 || y.size() != x.size())
    throw Error(ErrorCode::DimensionMismatch, "need >= 2 matching points to fit");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < k; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = k * sxx - sx * sx;
  LogLogFit fit;
  fit.slope = (k * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / k;
  if (k > 2) {
    double rss = 0.0;
    for (int i = 0; i < k; ++i) {
      const double lx = std::log(x[i]);
      const double ly = std::log(y[i]);
      const double resid = ly - (fit.intercept + fit.slope * lx);
      rss += resid * resid;
    }
    const double var = rss / (k - 2);
    fit.stderr_slope = std::sqrt(var * k / denom);
    fit.ci_halfwidth = t_quantile_975(k - 2) * fit.stderr_slope;
  }
  return fit;
}

}  // namespace dsafe
