#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dsafe/geometry.hpp"
#include "dsafe/losses.hpp"
#include "dsafe/network.hpp"
#include "dsafe/rng.hpp"

namespace dsafe {

/// Parameters of the safe exploration phase around the baseline action.
struct ExplorationConfig {
  int T0 = 0;                        // exploration rounds
  double gamma = 0.0;                // mixing weight in [0, 1)
  double sigma_zeta = 0.0;           // per-coordinate perturbation scale
  Eigen::VectorXd baseline;          // x^s
  Eigen::VectorXd baseline_offsets;  // b^s = A x^s
  double safety_gap = 0.0;           // Delta^s = min_k (b_k - b^s_k)
};

/// gamma upper bound Delta^s / (L * L_A), clipped strictly below 1.
double gamma_max(double delta_s, double L, double L_A);

/// Validated config; gamma defaults to gamma_max and sigma_zeta to L/sqrt(d)
/// when the optional overrides are <= 0.
ExplorationConfig make_exploration_config(const Scenario& scenario, int T0,
                                          double gamma_override = 0.0,
                                          double sigma_override = 0.0);

/// (1-gamma) x^s + gamma zeta with zeta i.i.d. Rademacher(+-sigma_zeta):
/// zero mean, covariance sigma^2 I and deterministic norm sigma*sqrt(d).
Eigen::VectorXd exploration_action(const ExplorationConfig& cfg, Rng& rng);

enum class NoiseKind { Gaussian, Uniform };

/// A x + w with per-coordinate noise of standard deviation R (Gaussian by
/// default; uniform on [-R sqrt(3), R sqrt(3)] for robustness runs).
Eigen::VectorXd observe(const Polytope& truth, const Eigen::VectorXd& x, double R,
                        Rng& rng, NoiseKind noise = NoiseKind::Gaussian);

struct AgentExploration {
  Eigen::MatrixXd actions;       // T0 x d
  Eigen::MatrixXd observations;  // T0 x n
};

struct ExplorationLog {
  std::vector<AgentExploration> agents;
  int T0 = 0;

  int num_agents() const { return static_cast<int>(agents.size()); }
  Eigen::Index dim() const { return agents.empty() ? 0 : agents.front().actions.cols(); }
  Eigen::Index num_constraints() const {
    return agents.empty() ? 0 : agents.front().observations.cols();
  }
};

/// Runs the exploration loop for all agents with seed-derived per-agent
/// streams; output is independent of thread count.
ExplorationLog run_exploration(const Polytope& truth, const ExplorationConfig& cfg,
                               int m, double R, std::uint64_t master_seed,
                               NoiseKind noise = NoiseKind::Gaussian, int threads = 1);

/// grad l_i(A) = 2 sum_t (A x_{i,t} - xhat_{i,t}) x_{i,t}' + (2 lambda / m) A.
Eigen::MatrixXd local_loss_gradient(const Eigen::MatrixXd& A_var,
                                    const AgentExploration& log_i, double lambda,
                                    int m);

/// Largest safe step size for the decentralized solver:
/// 1 / (2 L_grad) with L_grad = 2 (max_i lambda_max(sum_t x x') + lambda / m).
double default_extra_step(const ExplorationLog& logs, double lambda);

struct ExtraDiagnosticsRow {
  int iteration = 0;
  int agent = 0;
  double error_to_reference = 0.0;
  double max_pairwise = 0.0;
};

struct ExtraDiagnostics {
  Eigen::MatrixXd reference;  // compared against when non-empty
  std::vector<ExtraDiagnosticsRow> rows;
};

/// Decentralized exact first-order solve of the global ridge problem:
/// random init, one plain descent-and-mix step, then T1 - 1 corrected
/// iterations with P~ = (I + P) / 2. Returns the m final iterates.
/// Throws DivergenceDetected when an iterate norm exceeds 1e6 x data scale.
std::vector<Eigen::MatrixXd> extra_solve(const ExplorationLog& logs,
                                         const NetworkTopology& topology, double alpha,
                                         int T1, double lambda, std::uint64_t seed,
                                         ExtraDiagnostics* diagnostics = nullptr);

/// Exact minimizer of sum_i l_i(A) via the normal equations
/// A (sum x x' + lambda I) = sum xhat x'; reference oracle for extra_solve.
Eigen::MatrixXd centralized_ridge(const ExplorationLog& logs, double lambda);

/// Smallest T1 <= max_t1 for which every agent's iterate is within `target`
/// Frobenius distance of the centralized solution.
int calibrate_t1(const ExplorationLog& logs, const NetworkTopology& topology,
                 double alpha, double lambda, double target, int max_t1,
                 std::uint64_t seed);

struct ConfidenceParams {
  double horizon = 0.0;  // T
  double rho = 1.0;
  double R = 0.0;
  int d = 0;
  int m = 0;
  int T0 = 0;
  double L = 0.0;
  double lambda = 0.0;
  double delta = 0.0;
  int n = 0;
  double gamma = 0.0;
  double sigma_zeta = 0.0;
  double L_A = 0.0;
};

/// B_r = 1/T^rho
///     + (R sqrt(d log((1 + m T0 L^2/lambda) n / delta)) + sqrt(lambda) L_A)
///       / sqrt(m gamma^2 sigma^2 T0 / 2).
double confidence_radius(const ConfidenceParams& params);

/// Exploration rounds required by the concentration argument,
/// ceil(factor L^2 / (m gamma^2 sigma^2) log(d / delta)); factor defaults 8.
int concentration_t0(double L, int m, double gamma, double sigma_zeta, int d,
                     double delta, double factor = 8.0);

/// Per-agent estimate with the confidence radius and the parameters that
/// produced it.
struct SafeSetEstimate {
  Eigen::MatrixXd A_hat;
  double radius = 0.0;
  int agent = 0;
  int T0 = 0, T1 = 0;
  double lambda = 0.0, delta = 0.0, rho = 0.0, R = 0.0;
};

/// Packages an estimate for the projection machinery. Throws
/// EmptyEstimatedSet when the baseline itself fails robust membership,
/// i.e. the radius is too large for useful optimization.
RobustSafeSet build_safe_set(const Eigen::MatrixXd& A_hat, const Eigen::VectorXd& b,
                             double radius, RobustMode mode,
                             const Eigen::VectorXd& baseline, double norm_bound);

}  // namespace dsafe
