#include "dsafe/estimation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "dsafe/parallel.hpp"

namespace dsafe {

namespace {

constexpr std::uint64_t kExploreTag = 0x11;
constexpr std::uint64_t kObserveTag = 0x12;
constexpr std::uint64_t kExtraInitTag = 0x13;

// sum_t x x' and sum_t xhat x' for one agent.
struct AgentMoments {
  Eigen::MatrixXd second;  // d x d
  Eigen::MatrixXd cross;   // n x d
};

AgentMoments moments(const AgentExploration& log_i) {
  return {log_i.actions.transpose() * log_i.actions,
          log_i.observations.transpose() * log_i.actions};
}

double power_iteration_lambda_max(const Eigen::MatrixXd& M) {
  if (M.rows() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = M * v;
    double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    lambda = norm;
  }
  return lambda;
}

}  // namespace

double gamma_max(double delta_s, double L, double L_A) {
  if (delta_s <= 0.0 || L <= 0.0 || L_A <= 0.0)
    throw Error(ErrorCode::NonpositiveInput, "gamma_max requires positive inputs");
  return std::min(delta_s / (L * L_A), 1.0 - 1e-12);
}

ExplorationConfig make_exploration_config(const Scenario& scenario, int T0,
                                          double gamma_override,
                                          double sigma_override) {
  if (T0 < 0) throw Error(ErrorCode::NonpositiveInput, "T0 must be >= 0");
  ExplorationConfig cfg;
  cfg.T0 = T0;
  cfg.baseline = scenario.baseline;
  cfg.baseline_offsets = scenario.baseline_offsets;
  cfg.safety_gap = scenario.safety_gap;

  const double bound = gamma_max(scenario.safety_gap, scenario.L, scenario.L_A);
  cfg.gamma = gamma_override > 0.0 ? gamma_override : bound;
  if (cfg.gamma > bound)
    throw Error(ErrorCode::ConfigInvalid,
                "gamma " + std::to_string(cfg.gamma) + " exceeds the safe bound " +
                    std::to_string(bound));

  const double sigma_bound =
      scenario.L / std::sqrt(static_cast<double>(scenario.baseline.size()));
  cfg.sigma_zeta = sigma_override > 0.0 ? sigma_override : sigma_bound;
  if (cfg.sigma_zeta > sigma_bound + 1e-12)
    throw Error(ErrorCode::ConfigInvalid,
                "sigma_zeta exceeds L/sqrt(d); perturbation norm would leave the ball");
  return cfg;
}

Eigen::VectorXd exploration_action(const ExplorationConfig& cfg, Rng& rng) {
  Eigen::VectorXd zeta = rng.rademacher_vector(cfg.baseline.size(), cfg.sigma_zeta);
  return (1.0 - cfg.gamma) * cfg.baseline + cfg.gamma * zeta;
}

Eigen::VectorXd observe(const Polytope& truth, const Eigen::VectorXd& x, double R,
                        Rng& rng, NoiseKind noise) {
  if (R < 0.0) throw Error(ErrorCode::NonpositiveInput, "noise level R must be >= 0");
  Eigen::VectorXd y = truth.A * x;
  if (R == 0.0) return y;
  const Eigen::Index n = y.size();
  if (noise == NoiseKind::Gaussian) {
    for (Eigen::Index k = 0; k < n; ++k) y[k] += R * rng.gaussian();
  } else {
    const double half_width = R * std::sqrt(3.0);
    for (Eigen::Index k = 0; k < n; ++k) y[k] += rng.uniform(-half_width, half_width);
  }
  return y;
}

ExplorationLog run_exploration(const Polytope& truth, const ExplorationConfig& cfg,
                               int m, double R, std::uint64_t master_seed,
                               NoiseKind noise, int threads) {
  if (m < 1) throw Error(ErrorCode::NonpositiveInput, "need at least one agent");
  ExplorationLog log;
  log.T0 = cfg.T0;
  log.agents.resize(m);
  const Eigen::Index d = truth.dim();
  const Eigen::Index n = truth.num_constraints();

  parallel_for_index(m, threads, [&](int i) {
    Rng action_rng(derive_seed(master_seed, kExploreTag, i));
    Rng noise_rng(derive_seed(master_seed, kObserveTag, i));
    AgentExploration& slot = log.agents[i];
    slot.actions.resize(cfg.T0, d);
    slot.observations.resize(cfg.T0, n);
    for (int t = 0; t < cfg.T0; ++t) {
      Eigen::VectorXd x = exploration_action(cfg, action_rng);
      slot.actions.row(t) = x.transpose();
      slot.observations.row(t) = observe(truth, x, R, noise_rng, noise).transpose();
    }
  });
  return log;
}

Eigen::MatrixXd local_loss_gradient(const Eigen::MatrixXd& A_var,
                                    const AgentExploration& log_i, double lambda,
                                    int m) {
  if (lambda <= 0.0) throw Error(ErrorCode::NonpositiveInput, "lambda must be > 0");
  if (log_i.actions.cols() != A_var.cols() ||
      log_i.observations.cols() != A_var.rows())
    throw Error(ErrorCode::DimensionMismatch,
                "gradient shape does not match the exploration data");
  AgentMoments mom = moments(log_i);
  return 2.0 * (A_var * mom.second - mom.cross) + (2.0 * lambda / m) * A_var;
}

double default_extra_step(const ExplorationLog& logs, double lambda) {
  if (lambda <= 0.0) throw Error(ErrorCode::NonpositiveInput, "lambda must be > 0");
  const int m = logs.num_agents();
  double worst = 0.0;
  for (const auto& agent : logs.agents)
    worst = std::max(worst,
                     power_iteration_lambda_max(agent.actions.transpose() * agent.actions));
  const double l_grad = 2.0 * (worst + lambda / m);
  return 1.0 / (2.0 * l_grad);
}

std::vector<Eigen::MatrixXd> extra_solve(const ExplorationLog& logs,
                                         const NetworkTopology& topology, double alpha,
                                         int T1, double lambda, std::uint64_t seed,
                                         ExtraDiagnostics* diagnostics) {
  if (alpha <= 0.0) throw Error(ErrorCode::NonpositiveInput, "alpha must be > 0");
  if (T1 < 2) throw Error(ErrorCode::NonpositiveInput, "T1 must be >= 2");
  const int m = logs.num_agents();
  if (m != topology.m)
    throw Error(ErrorCode::DimensionMismatch, "log/topology agent counts differ");
  const Eigen::Index n = logs.num_constraints();
  const Eigen::Index d = logs.dim();

  std::vector<AgentMoments> mom;
  mom.reserve(m);
  double data_scale = 1.0;
  for (const auto& agent : logs.agents) {
    mom.push_back(moments(agent));
    data_scale = std::max({data_scale, mom.back().second.norm(), mom.back().cross.norm()});
  }
  const double divergence_bound = 1e6 * data_scale;

  auto gradient = [&](int i, const Eigen::MatrixXd& A) {
    return 2.0 * (A * mom[i].second - mom[i].cross) + (2.0 * lambda / m) * A;
  };

  std::vector<Eigen::MatrixXd> prev(m), curr(m), grad_prev(m);
  for (int i = 0; i < m; ++i) {
    Rng init_rng(derive_seed(seed, kExtraInitTag, i));
    prev[i] = init_rng.gaussian_matrix(n, d, 1.0);
  }

  const Eigen::MatrixXd& P = topology.mixing;
  const Eigen::MatrixXd P_half = topology.half_lazy();

  // First step mixes with P itself; the corrected recursion then uses P~.
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, d);
    for (int j = 0; j < m; ++j)
      if (P(j, i) != 0.0) mixed += P(j, i) * prev[j];
    grad_prev[i] = gradient(i, prev[i]);
    curr[i] = mixed - alpha * grad_prev[i];
  }

  auto record = [&](int iteration, const std::vector<Eigen::MatrixXd>& iterates) {
    if (!diagnostics) return;
    double max_pairwise = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        max_pairwise = std::max(max_pairwise, (iterates[i] - iterates[j]).norm());
    for (int i = 0; i < m; ++i) {
      double err = diagnostics->reference.size() > 0
                       ? (iterates[i] - diagnostics->reference).norm()
                       : 0.0;
      diagnostics->rows.push_back({iteration, i, err, max_pairwise});
    }
  };
  record(1, curr);

  for (int step = 0; step < T1 - 1; ++step) {
    std::vector<Eigen::MatrixXd> next(m);
    for (int i = 0; i < m; ++i) {
      Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, d);
      for (int j = 0; j < m; ++j)
        if (P_half(j, i) != 0.0) mixed += P_half(j, i) * (2.0 * curr[j] - prev[j]);
      Eigen::MatrixXd grad_curr = gradient(i, curr[i]);
      next[i] = mixed - alpha * (grad_curr - grad_prev[i]);
      grad_prev[i] = std::move(grad_curr);
      if (!next[i].allFinite() || next[i].norm() > divergence_bound)
        throw Error(ErrorCode::DivergenceDetected,
                    "iterate norm exceeded " + std::to_string(divergence_bound) +
                        " at step " + std::to_string(step + 2));
    }
    prev = std::move(curr);
    curr = std::move(next);
    record(step + 2, curr);
  }
  return curr;
}

Eigen::MatrixXd centralized_ridge(const ExplorationLog& logs, double lambda) {
  if (lambda <= 0.0) throw Error(ErrorCode::NonpositiveInput, "lambda must be > 0");
  const Eigen::Index d = logs.dim();
  const Eigen::Index n = logs.num_constraints();
  Eigen::MatrixXd V = lambda * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, d);
  for (const auto& agent : logs.agents) {
    AgentMoments mom = moments(agent);
    V += mom.second;
    S += mom.cross;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularSystem, "ridge normal equations not positive definite");
  return llt.solve(S.transpose()).transpose();
}

int calibrate_t1(const ExplorationLog& logs, const NetworkTopology& topology,
                 double alpha, double lambda, double target, int max_t1,
                 std::uint64_t seed) {
  ExtraDiagnostics diag;
  diag.reference = centralized_ridge(logs, lambda);
  extra_solve(logs, topology, alpha, max_t1, lambda, seed, &diag);

  const int m = logs.num_agents();
  std::vector<double> worst_by_iteration(max_t1 + 1, 0.0);
  for (const auto& row : diag.rows)
    worst_by_iteration[row.iteration] =
        std::max(worst_by_iteration[row.iteration], row.error_to_reference);
  for (int t1 = 2; t1 <= max_t1; ++t1)
    if (worst_by_iteration[t1] <= target) return t1;
  throw Error(ErrorCode::NoConvergence,
              "estimates did not reach target " + std::to_string(target) + " within " +
                  std::to_string(max_t1) + " iterations");
}

double confidence_radius(const ConfidenceParams& p) {
  if (p.horizon <= 0.0 || p.rho <= 0.0 || p.R < 0.0 || p.d <= 0 || p.m <= 0 ||
      p.T0 <= 0 || p.L <= 0.0 || p.lambda <= 0.0 || p.n <= 0 || p.gamma <= 0.0 ||
      p.sigma_zeta <= 0.0 || p.L_A <= 0.0)
    throw Error(ErrorCode::NonpositiveInput, "confidence radius inputs must be positive");
  if (p.delta <= 0.0 || p.delta >= 1.0)
    throw Error(ErrorCode::NonpositiveInput, "delta must lie in (0, 1)");

  const double consensus_term = std::pow(p.horizon, -p.rho);
  const double log_arg = (1.0 + p.m * p.T0 * p.L * p.L / p.lambda) * p.n / p.delta;
  const double numerator =
      p.R * std::sqrt(p.d * std::log(log_arg)) + std::sqrt(p.lambda) * p.L_A;
  const double denominator =
      std::sqrt(0.5 * p.m * p.gamma * p.gamma * p.sigma_zeta * p.sigma_zeta * p.T0);
  return consensus_term + numerator / denominator;
}

int concentration_t0(double L, int m, double gamma, double sigma_zeta, int d,
                     double delta, double factor) {
  if (L <= 0.0 || m <= 0 || gamma <= 0.0 || sigma_zeta <= 0.0 || d <= 0 ||
      delta <= 0.0 || delta >= 1.0 || factor <= 0.0)
    throw Error(ErrorCode::NonpositiveInput, "t0 sizing inputs must be positive");
  const double t0 =
      factor * L * L / (m * gamma * gamma * sigma_zeta * sigma_zeta) * std::log(d / delta);
  return std::max(1, static_cast<int>(std::ceil(t0)));
}

RobustSafeSet build_safe_set(const Eigen::MatrixXd& A_hat, const Eigen::VectorXd& b,
                             double radius, RobustMode mode,
                             const Eigen::VectorXd& baseline, double norm_bound) {
  if (radius < 0.0) throw Error(ErrorCode::NonpositiveInput, "radius must be >= 0");
  if (A_hat.rows() != b.size() || A_hat.cols() != baseline.size())
    throw Error(ErrorCode::DimensionMismatch, "estimate/offset/baseline shapes disagree");
  RobustSafeSet set{A_hat, b, radius, mode, norm_bound};
  if (set.violation(baseline) > 0.0)
    throw Error(ErrorCode::EmptyEstimatedSet,
                "baseline action fails robust membership; the confidence radius is too "
                "large for useful optimization");
  return set;
}

}  // namespace dsafe
