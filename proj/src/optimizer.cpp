#include "dsafe/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsafe/parallel.hpp"

namespace dsafe {

namespace {

// Shared loop for both modes. `sets` holds one robust set per agent (all
// equal in common-set mode); `box` carries the clamp bounds when the
// feasible set is an axis-aligned box (shadow runs).
struct LoopSetup {
  const std::vector<RobustSafeSet>* sets = nullptr;
  const Eigen::VectorXd* box_lo = nullptr;
  const Eigen::VectorXd* box_hi = nullptr;
};

Eigen::VectorXd clamp_to(const Eigen::VectorXd& v, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

void record_round(RunRecord& record, int t, Phase phase,
                  const std::vector<Eigen::VectorXd>& actions) {
  const Scenario& scenario = *record.scenario;
  const int m = record.m;
  record.phase[t] = phase;
  Eigen::MatrixXd& slot = record.actions[t];
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(scenario.losses.d);
  for (int i = 0; i < m; ++i) {
    slot.row(i) = actions[i].transpose();
    mean += actions[i];
  }
  mean /= m;
  double dis = 0.0;
  for (int i = 0; i < m; ++i) {
    dis = std::max(dis, (mean - actions[i]).norm());
    record.local_loss(t, i) = scenario.losses.local_value(i, t, actions[i]);
    record.global_loss(t, i) = scenario.losses.global_value(t, actions[i]);
    record.slack(t, i) = (scenario.truth.b - scenario.truth.A * actions[i]).minCoeff();
  }
  record.disagreement[t] = dis;
}

RunRecord run_loop(std::shared_ptr<const Scenario> scenario,
                   const NetworkTopology& topology, const Schedule& schedule,
                   const ExplorationLog& exploration, const LoopSetup& setup,
                   double radius, bool common_set, const RunOptions& options) {
  const Scenario& scn = *scenario;
  const int m = topology.m;
  const int T = schedule.T;
  const int start = schedule.optimization_start();
  if (start >= T)
    throw Error(ErrorCode::ScheduleInvalid,
                "optimization starts at round " + std::to_string(start + 1) +
                    " but the horizon is " + std::to_string(T));
  if (scn.losses.horizon < T)
    throw Error(ErrorCode::HorizonMismatch, "loss sequence shorter than the horizon");
  if (exploration.num_agents() != m || exploration.T0 < schedule.T0)
    throw Error(ErrorCode::ScheduleInvalid, "exploration log does not cover T0 rounds");

  RunRecord record;
  record.scenario = scenario;
  record.T = T;
  record.m = m;
  record.optimization_start = start;
  record.eta = schedule.eta;
  record.radius = radius;
  record.beta = topology.beta;
  record.common_set = common_set;
  record.shadow_enabled = options.shadow_omd;
  record.phase.assign(T, Phase::Explore);
  record.actions.assign(T, Eigen::MatrixXd::Zero(m, scn.losses.d));
  record.local_loss.setZero(T, m);
  record.global_loss.setZero(T, m);
  record.slack.setZero(T, m);
  record.disagreement.assign(T, 0.0);
  record.deviation.assign(T, 0.0);

  const bool use_box = setup.box_lo != nullptr;
  const bool shadow = options.shadow_omd;
  const MirrorMap* mirror = shadow ? scn.losses.mirror.get() : nullptr;
  Eigen::VectorXd u_lo, u_hi;
  if (shadow) {
    u_lo = mirror->map(*setup.box_lo);
    u_hi = mirror->map(*setup.box_hi);
  }

  std::vector<AgentState> agents(m);
  std::vector<Eigen::VectorXd> actions(m);

  for (int t = 0; t < T; ++t) {
    if (t < schedule.T0) {
      for (int i = 0; i < m; ++i) actions[i] = exploration.agents[i].actions.row(t);
      record_round(record, t, Phase::Explore, actions);
      continue;
    }
    if (t < start) {
      Phase phase = t < schedule.T0 + schedule.T1 ? Phase::Estimate : Phase::Consensus;
      for (int i = 0; i < m; ++i) actions[i] = scn.baseline;
      record_round(record, t, phase, actions);
      continue;
    }

    if (t == start)
      for (int i = 0; i < m; ++i) agents[i].x = scn.baseline;  // identical initialization

    for (int i = 0; i < m; ++i) actions[i] = agents[i].x;
    record_round(record, t, Phase::Optimize, actions);

    parallel_for_index(m, options.threads, [&](int i) {
      Eigen::VectorXd gradient = scn.losses.local_gradient(i, t, agents[i].x);
      Eigen::VectorXd stepped = agents[i].x - schedule.eta * gradient;
      agents[i].y = use_box ? clamp_to(stepped, *setup.box_lo, *setup.box_hi)
                            : project_robust_set((*setup.sets)[i], stepped,
                                                 options.projection_tol,
                                                 options.projection_max_iter,
                                                 options.projection_log);
      if (shadow) {
        agents[i].u = mirror->map(agents[i].x);
        Eigen::VectorXd g_tilde =
            scn.losses.tilde_gradient(i, t, agents[i].u);
        agents[i].z = omd_local_step(agents[i].u, g_tilde, schedule.eta, *mirror,
                                     u_lo, u_hi);
      }
    });

    std::vector<Eigen::VectorXd> mixed(m);
    for (int i = 0; i < m; ++i) {
      mixed[i] = Eigen::VectorXd::Zero(scn.losses.d);
      for (int j = 0; j < m; ++j)
        if (topology.mixing(j, i) != 0.0) mixed[i] += topology.mixing(j, i) * agents[j].y;
    }
    if (shadow && t + 1 < T) {
      // One-step deviation: both updates start from u = q(x) this round, so
      // || q(x_{t+1}) - u_{t+1} || isolates the discretization gap.
      double worst = 0.0;
      for (int i = 0; i < m; ++i) {
        Eigen::VectorXd u_next = Eigen::VectorXd::Zero(scn.losses.d);
        for (int j = 0; j < m; ++j)
          if (topology.mixing(j, i) != 0.0)
            u_next += topology.mixing(j, i) * agents[j].z;
        worst = std::max(worst, (mirror->map(mixed[i]) - u_next).norm());
      }
      record.deviation[t + 1] = worst;
    }
    for (int i = 0; i < m; ++i) agents[i].x = std::move(mixed[i]);
  }
  return record;
}

std::vector<RobustSafeSet> build_agent_sets(const Scenario& scenario,
                                            const std::vector<SafeSetEstimate>& estimates,
                                            const RunOptions& options) {
  std::vector<RobustSafeSet> sets;
  sets.reserve(estimates.size());
  for (const auto& est : estimates)
    sets.push_back(build_safe_set(est.A_hat, scenario.truth.b, est.radius,
                                  options.projection_mode, scenario.baseline,
                                  scenario.L));
  return sets;
}

}  // namespace

Schedule make_schedule(int T, LossKind kind, int T1, int consensus_rounds,
                       double eta_scale, double t0_scale, double eta_override,
                       int t0_override) {
  if (T < 1) throw Error(ErrorCode::ScheduleInvalid, "horizon must be >= 1");
  Schedule s;
  s.T = T;
  s.T1 = T1;
  s.consensus_rounds = consensus_rounds;
  const double t_real = static_cast<double>(T);
  s.T0 = t0_override > 0
             ? t0_override
             : static_cast<int>(std::ceil(t0_scale * std::pow(t_real, 2.0 / 3.0)));
  const double exponent = kind == LossKind::ConvexTracking ? -1.0 / 3.0 : -2.0 / 3.0;
  s.eta = eta_override > 0.0 ? eta_override : eta_scale * std::pow(t_real, exponent);
  if (s.T0 < 1 || s.T1 < 0 || s.consensus_rounds < 0 || s.eta <= 0.0)
    throw Error(ErrorCode::ScheduleInvalid, "phase lengths must be nonnegative");
  if (s.optimization_start() >= T)
    throw Error(ErrorCode::ScheduleInvalid,
                "T0 + T1 + consensus rounds leave no optimization rounds");
  return s;
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::Explore: return "explore";
    case Phase::Estimate: return "estimate";
    case Phase::Consensus: return "consensus";
    case Phase::Optimize: return "optimize";
  }
  return "?";
}

Eigen::VectorXd ogd_local_step(const AgentState& state, const Eigen::VectorXd& gradient,
                               double eta, const RobustSafeSet& safe_set,
                               const RunOptions& options) {
  if (eta <= 0.0) throw Error(ErrorCode::NonpositiveInput, "eta must be > 0");
  return project_robust_set(safe_set, state.x - eta * gradient, options.projection_tol,
                            options.projection_max_iter, options.projection_log);
}

RunRecord run_d_safe_ogd_convex(std::shared_ptr<const Scenario> scenario,
                                const NetworkTopology& topology, const Schedule& schedule,
                                const std::vector<SafeSetEstimate>& estimates,
                                const ExplorationLog& exploration,
                                const RunOptions& options) {
  if (static_cast<int>(estimates.size()) != topology.m)
    throw Error(ErrorCode::DimensionMismatch, "need one estimate per agent");
  std::vector<RobustSafeSet> sets = build_agent_sets(*scenario, estimates, options);
  LoopSetup setup;
  setup.sets = &sets;
  RunOptions opts = options;
  opts.shadow_omd = false;
  return run_loop(std::move(scenario), topology, schedule, exploration, setup,
                  estimates.front().radius, /*common_set=*/false, opts);
}

RunRecord run_d_safe_ogd_nonconvex(std::shared_ptr<const Scenario> scenario,
                                   const NetworkTopology& topology,
                                   const Schedule& schedule,
                                   const std::vector<SafeSetEstimate>& estimates,
                                   const ExplorationLog& exploration,
                                   const RunOptions& options) {
  if (static_cast<int>(estimates.size()) != topology.m)
    throw Error(ErrorCode::DimensionMismatch, "need one estimate per agent");
  if (schedule.consensus_rounds != topology.diameter)
    throw Error(ErrorCode::ScheduleInvalid,
                "common-set mode requires exactly D_G consensus rounds");

  std::vector<Eigen::MatrixXd> raw;
  raw.reserve(estimates.size());
  for (const auto& est : estimates) raw.push_back(est.A_hat);
  Eigen::MatrixXd agreed = max_consensus(raw, topology);

  RobustSafeSet common = build_safe_set(agreed, scenario->truth.b,
                                        estimates.front().radius,
                                        options.projection_mode, scenario->baseline,
                                        scenario->L);
  std::vector<RobustSafeSet> sets(topology.m, common);

  LoopSetup setup;
  setup.sets = &sets;
  Eigen::VectorXd box_lo, box_hi;
  if (options.shadow_omd) {
    if (scenario->box_lo.size() == 0)
      throw Error(ErrorCode::DomainViolation,
                  "shadow diagnostics need a box scenario in the positive orthant");
    std::tie(box_lo, box_hi) = inscribe_box(common, scenario->box_lo, scenario->box_hi);
    setup.box_lo = &box_lo;
    setup.box_hi = &box_hi;
  }
  return run_loop(std::move(scenario), topology, schedule, exploration, setup,
                  estimates.front().radius, /*common_set=*/true, options);
}

Eigen::VectorXd omd_local_step(const Eigen::VectorXd& u, const Eigen::VectorXd& grad_tilde,
                               double eta, const MirrorMap& mirror,
                               const Eigen::VectorXd& u_lo, const Eigen::VectorXd& u_hi) {
  if (eta <= 0.0) throw Error(ErrorCode::NonpositiveInput, "eta must be > 0");
  if (mirror.positive_domain() && (u.array() <= 0.0).any())
    throw Error(ErrorCode::DomainViolation, "mirror iterate left the positive orthant");
  return clamp_to(mirror.mirror_step(u, grad_tilde, eta), u_lo, u_hi);
}

double consensus_disagreement(const RunRecord& record, int t) {
  if (t < 0 || t >= record.T)
    throw Error(ErrorCode::HorizonMismatch, "round outside the recorded horizon");
  const Eigen::MatrixXd& at = record.actions[t];
  Eigen::RowVectorXd mean = at.colwise().mean();
  double worst = 0.0;
  for (int i = 0; i < record.m; ++i)
    worst = std::max(worst, (at.row(i) - mean).norm());
  return worst;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> inscribe_box(
    const RobustSafeSet& set, const Eigen::VectorXd& box_lo,
    const Eigen::VectorXd& box_hi) {
  const Eigen::Index d = box_lo.size();
  Eigen::VectorXd center = 0.5 * (box_lo + box_hi);
  if (set.violation(center) > 0.0)
    throw Error(ErrorCode::EmptyEstimatedSet, "box center is outside the robust set");

  auto corners_feasible = [&](double s) {
    const long corners = 1L << d;
    for (long c = 0; c < corners; ++c) {
      Eigen::VectorXd v(d);
      for (Eigen::Index j = 0; j < d; ++j)
        v[j] = center[j] + s * (((c >> j) & 1 ? box_hi[j] : box_lo[j]) - center[j]);
      if (set.violation(v) > 0.0) return false;
    }
    return true;
  };

  double lo = 0.0, hi = 1.0;
  if (corners_feasible(1.0)) {
    lo = 1.0;
  } else {
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (corners_feasible(mid) ? lo : hi) = mid;
    }
  }
  return {center + lo * (box_lo - center), center + lo * (box_hi - center)};
}

}  // namespace dsafe
