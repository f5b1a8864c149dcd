#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "dsafe/estimation.hpp"
#include "dsafe/geometry.hpp"
#include "dsafe/losses.hpp"
#include "dsafe/network.hpp"

namespace dsafe {

/// Phase lengths and step size of one run. Rounds are 0-based internally;
/// the first optimization round is T0 + T1 + consensus_rounds.
struct Schedule {
  int T = 0;
  int T0 = 0;
  int T1 = 0;
  int consensus_rounds = 0;  // D_G in common-set mode, 0 otherwise
  double eta = 0.0;

  int optimization_start() const { return T0 + T1 + consensus_rounds; }
};

/// Horizon-indexed presets: eta = eta_scale * T^(-1/3) and
/// T0 = ceil(t0_scale * T^(2/3)) for the convex mode; the non-convex mode
/// uses eta = eta_scale * T^(-2/3). Throws ScheduleInvalid when the phases
/// do not fit the horizon.
Schedule make_schedule(int T, LossKind kind, int T1, int consensus_rounds,
                       double eta_scale = 1.0, double t0_scale = 1.0,
                       double eta_override = 0.0, int t0_override = 0);

enum class Phase { Explore, Estimate, Consensus, Optimize };

const char* phase_name(Phase phase);

/// Everything one agent carries between rounds.
struct AgentState {
  Eigen::VectorXd x;  // pre-consensus action
  Eigen::VectorXd y;  // post-projection intermediate
  Eigen::VectorXd u;  // shadow mirror iterate (diagnostic runs)
  Eigen::VectorXd z;  // shadow post-step iterate
};

/// Full trajectory of a run plus the per-round audit quantities.
struct RunRecord {
  std::shared_ptr<const Scenario> scenario;
  int T = 0;
  int m = 0;
  int optimization_start = 0;
  double eta = 0.0;
  double radius = 0.0;  // confidence radius used by the safe sets
  double beta = 0.0;    // network spectral quantity, echoed for reports
  bool common_set = false;
  bool shadow_enabled = false;

  std::vector<Phase> phase;              // [T]
  std::vector<Eigen::MatrixXd> actions;  // [T], each m x d
  Eigen::MatrixXd local_loss;            // T x m
  Eigen::MatrixXd global_loss;           // T x m : f_t evaluated at agent's action
  Eigen::MatrixXd slack;                 // T x m : min_k (b_k - a_k' x) vs truth
  std::vector<double> disagreement;      // [T] max_i ||mean_t - x_{i,t}||
  std::vector<double> deviation;         // [T] shadow one-step deviation
};

struct RunOptions {
  RobustMode projection_mode = RobustMode::ExactCone;
  double projection_tol = 1e-9;
  int projection_max_iter = 10000;
  int threads = 1;
  bool shadow_omd = false;  // non-convex runs only; forces a box feasible set
  ProjectionLog* projection_log = nullptr;
};

/// One gradient-projection step onto the agent's robust set.
Eigen::VectorXd ogd_local_step(const AgentState& state, const Eigen::VectorXd& gradient,
                               double eta, const RobustSafeSet& safe_set,
                               const RunOptions& options = {});

/// Online gradient descent over per-agent feasible sets: exploration rounds
/// replay the log, the solve rounds play the baseline, and from the first
/// optimization round all agents start at the baseline, step on their local
/// gradients, project onto their own sets and average over the network.
RunRecord run_d_safe_ogd_convex(std::shared_ptr<const Scenario> scenario,
                                const NetworkTopology& topology, const Schedule& schedule,
                                const std::vector<SafeSetEstimate>& estimates,
                                const ExplorationLog& exploration,
                                const RunOptions& options = {});

/// Common-set mode: after the solve rounds the agents run D_G max-consensus
/// rounds (playing the baseline), construct one shared feasible set from the
/// surviving estimate and then run the same loop on it. With shadow_omd set,
/// the feasible set is the largest centered box inscribed in the shared set
/// and each round also takes the mirror-descent step from the current
/// iterates, recording || q(x_next) - u_next || as the one-step deviation.
RunRecord run_d_safe_ogd_nonconvex(std::shared_ptr<const Scenario> scenario,
                                   const NetworkTopology& topology,
                                   const Schedule& schedule,
                                   const std::vector<SafeSetEstimate>& estimates,
                                   const ExplorationLog& exploration,
                                   const RunOptions& options = {});

/// Mirror step over a box in u-space: coordinatewise unconstrained argmin of
/// the linearized loss plus Bregman proximity, clamped to the box (exact for
/// separable potentials).
Eigen::VectorXd omd_local_step(const Eigen::VectorXd& u, const Eigen::VectorXd& grad_tilde,
                               double eta, const MirrorMap& mirror,
                               const Eigen::VectorXd& u_lo, const Eigen::VectorXd& u_hi);

/// max_i || xbar_t - x_{i,t} || at round t of a recorded run.
double consensus_disagreement(const RunRecord& record, int t);

/// Largest s in [0,1] such that center + s (box - center) lies inside the
/// robust set (checked at the corners; the constraints are convex so corner
/// membership certifies the whole box). Throws EmptyEstimatedSet when the
/// center itself is outside.
std::pair<Eigen::VectorXd, Eigen::VectorXd> inscribe_box(
    const RobustSafeSet& set, const Eigen::VectorXd& box_lo,
    const Eigen::VectorXd& box_hi);

}  // namespace dsafe
