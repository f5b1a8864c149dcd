#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "dsafe/errors.hpp"
#include "dsafe/geometry.hpp"
#include "dsafe/rng.hpp"

namespace dsafe {

class Rng;

/// Reparameterization pair (q, phi) with [grad^2 phi(u)]^-1 = J_q J_q' at
/// u = q(x). The built-in pair is q(x) = x^2/4 with negative entropy; the
/// identity/Euclidean pair exists for tests and degenerate runs.
class MirrorMap {
 public:
  virtual ~MirrorMap() = default;

  virtual Eigen::VectorXd map(const Eigen::VectorXd& x) const = 0;      // q
  virtual Eigen::VectorXd inverse(const Eigen::VectorXd& u) const = 0;  // q^-1
  virtual Eigen::VectorXd jacobian_diag(const Eigen::VectorXd& x) const = 0;
  virtual double potential(const Eigen::VectorXd& u) const = 0;  // phi
  virtual Eigen::VectorXd potential_gradient(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd hessian_diag(const Eigen::VectorXd& u) const = 0;

  /// Coordinatewise unconstrained argmin of g'z + (1/eta) D_phi(z, u);
  /// clamping the result to a box solves the box-constrained step exactly.
  virtual Eigen::VectorXd mirror_step(const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& g, double eta) const = 0;

  virtual bool positive_domain() const = 0;
  virtual std::string name() const = 0;
};

/// q(x) = x^2/4 on the positive orthant, phi(u) = sum u log u - u.
std::shared_ptr<const MirrorMap> make_quadratic_entropy_map();
/// q = identity, phi = 0.5||u||^2; collapses mirror descent to gradient descent.
std::shared_ptr<const MirrorMap> make_identity_euclidean_map();

/// D_phi(u, z) = phi(u) - phi(z) - grad phi(z)'(u - z).
double bregman(const MirrorMap& mirror, const Eigen::VectorXd& u,
               const Eigen::VectorXd& z);

enum class LossKind { ConvexTracking, NonconvexReparameterized };

enum class DriftKind { None, RandomWalk, Switching };

struct DriftSpec {
  DriftKind kind = DriftKind::None;
  double step = 0.0;      // random-walk step length per round
  int switch_count = 0;   // total comparator jumps over the horizon
};

/// Time-varying quadratic loss family. Convex kind: f_{i,t}(x) =
/// 0.5||x - theta_{i,t}||^2. Non-convex kind: f~_{i,t}(u) =
/// 0.5||u - psi_{i,t}||^2 composed with u = q(x).
struct LossSequence {
  LossKind kind = LossKind::ConvexTracking;
  int m = 0;
  int horizon = 0;
  Eigen::Index d = 0;
  double G = 0.0;  // gradient bound of f_{i,t} over the true safe set

  // targets[i].row(t): theta_{i,t} (convex) or psi_{i,t} in u-space (nonconvex)
  std::vector<Eigen::MatrixXd> targets;

  std::shared_ptr<const MirrorMap> mirror;  // nonconvex kind only
  double G_F = 0.0, W = 0.0, D_prime = 0.0;
  Eigen::VectorXd u_lo, u_hi;  // q-image of the box domain (nonconvex kind)

  double local_value(int agent, int t, const Eigen::VectorXd& x) const;
  Eigen::VectorXd local_gradient(int agent, int t, const Eigen::VectorXd& x) const;
  double global_value(int t, const Eigen::VectorXd& x) const;

  // convex counterpart in u-space (nonconvex kind)
  double tilde_value(int agent, int t, const Eigen::VectorXd& u) const;
  Eigen::VectorXd tilde_gradient(int agent, int t, const Eigen::VectorXd& u) const;
};

/// True feasible region plus everything agents are allowed to know about it.
struct Scenario {
  Polytope truth;                   // hidden from the algorithms, used by audits
  Eigen::VectorXd baseline;         // x^s, strictly feasible
  Eigen::VectorXd baseline_offsets; // b^s = A x^s
  double safety_gap = 0.0;          // min_k (b_k - b^s_k)
  double L = 0.0;                   // ||x|| bound over the true region
  double L_A = 0.0;                 // max row norm of A
  Eigen::VectorXd box_lo, box_hi;   // set for nonconvex (box) scenarios
  LossSequence losses;
};

struct ConvexScenarioParams {
  int d = 2;
  int m = 4;
  int extra_rows = 2;  // constraints beyond the bounding box
  int horizon = 1000;
  double box_halfwidth = 1.0;
  double target_region_fraction = 0.4;  // drift region relative to the box
  DriftSpec drift;
};

struct NonconvexScenarioParams {
  int d = 2;
  int m = 4;
  int horizon = 1000;
  double box_lo = 0.5;
  double box_hi = 1.8;
  DriftSpec drift;
};

/// Box-bounded polytope with a few extra random faces; tracking targets
/// drift inside an inner region so global minimizers stay interior.
Scenario make_convex_tracking(const ConvexScenarioParams& params, Rng& rng);

/// Box in the positive orthant with quadratic-in-u losses; requires
/// 0 < lo < hi <= 2 so the entropy potential is 1-strongly convex on q(box).
Scenario make_nonconvex_family(const NonconvexScenarioParams& params, Rng& rng);

/// Hindsight minimizer x*_t of the round-t global loss over the true region.
Eigen::VectorXd hindsight_minimizer(const LossSequence& seq, int t,
                                    const Polytope& truth, double tol = 1e-10);

/// Global minimizer sequence plus its cumulative variation. `x_tilde` holds
/// the comparators projected onto the shrunk true region when a report needs
/// the three-term decomposition; empty otherwise.
struct MinimizerTrace {
  std::vector<Eigen::VectorXd> x_star;   // one per round
  std::vector<Eigen::VectorXd> x_tilde;  // optional shrunk comparators
  double tau_in = 0.0;                   // tightening used for x_tilde

  int horizon() const { return static_cast<int>(x_star.size()); }
};

MinimizerTrace compute_minimizer_trace(const LossSequence& seq, const Polytope& truth,
                                       double tol = 1e-10);

/// sum_{t>=2} ||x*_t - x*_{t-1}||; zero for traces of length <= 1.
double path_length(const MinimizerTrace& trace);

}  // namespace dsafe
