#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dsafe/errors.hpp"

namespace dsafe {

/// Closed polytope {x : A x <= b}; rows of A are the constraint normals.
struct Polytope {
  Eigen::MatrixXd A;  // n x d
  Eigen::VectorXd b;  // n

  Eigen::Index num_constraints() const { return A.rows(); }
  Eigen::Index dim() const { return A.cols(); }

  /// max_k (a_k'x - b_k); <= 0 iff feasible.
  double violation(const Eigen::VectorXd& x) const {
    return (A * x - b).maxCoeff();
  }
};

enum class RobustMode {
  ExactCone,             // a_hat'x + radius*||x|| <= b per row
  ConservativePolytope,  // a_hat'x <= b - radius*norm_bound per row
};

/// Estimated feasible region tightened by a per-row confidence ball of the
/// given radius. `norm_bound` is the certified bound on ||x|| over the true
/// region; the conservative mode folds radius*||x|| into a constant offset
/// with it.
struct RobustSafeSet {
  Eigen::MatrixXd A_hat;  // n x d
  Eigen::VectorXd b;      // n
  double radius = 0.0;
  RobustMode mode = RobustMode::ExactCone;
  double norm_bound = 0.0;  // L

  Eigen::Index num_constraints() const { return A_hat.rows(); }
  Eigen::Index dim() const { return A_hat.cols(); }

  /// Equivalent tightened polytope in conservative mode.
  Polytope conservative_polytope() const {
    return Polytope{A_hat, b.array() - radius * norm_bound};
  }

  double violation(const Eigen::VectorXd& x) const {
    if (mode == RobustMode::ConservativePolytope)
      return ((A_hat * x).array() - (b.array() - radius * norm_bound)).maxCoeff();
    return ((A_hat * x).array() + radius * x.norm() - b.array()).maxCoeff();
  }
};

/// Appended once per projection call when tracing is enabled.
struct ProjectionEvent {
  int sweeps = 0;
  double residual = 0.0;
};
using ProjectionLog = std::vector<ProjectionEvent>;

bool contains(const Polytope& set, const Eigen::VectorXd& x, double tol);
bool contains(const RobustSafeSet& set, const Eigen::VectorXd& x, double tol);

/// Euclidean projection of z onto {x : a'x <= b}. Throws ZeroNormal if a = 0.
Eigen::VectorXd project_halfspace(const Eigen::VectorXd& a, double b,
                                  const Eigen::VectorXd& z);

/// Dykstra's alternating projection over the polytope's halfspaces.
Eigen::VectorXd project_polytope(const Polytope& poly, const Eigen::VectorXd& z,
                                 double tol = 1e-9, int max_iter = 10000,
                                 ProjectionLog* log = nullptr);

/// Projection onto the single robustified constraint
/// {x : a_hat'x + radius*||x|| <= b}, solved through the scalar dual: the
/// stationary point for each multiplier has a closed norm equation, and the
/// multiplier is bisected on the constraint residual.
Eigen::VectorXd project_cone_constraint(const Eigen::VectorXd& a_hat, double b,
                                        double radius, const Eigen::VectorXd& z,
                                        double tol = 1e-9);

/// Projection onto a robust safe set; Dykstra over the per-row cone
/// constraints in exact mode, polytope projection of the tightened rows in
/// conservative mode.
Eigen::VectorXd project_robust_set(const RobustSafeSet& set, const Eigen::VectorXd& z,
                                   double tol = 1e-9, int max_iter = 10000,
                                   ProjectionLog* log = nullptr);

/// Same rows, offsets reduced by tau_in. Throws EmptyShrunkSet when the
/// feasibility probe fails.
Polytope shrink_polytope(const Polytope& poly, double tau_in);

/// Cyclic-projection feasibility probe from the origin; nullopt when no point
/// with violation <= tol is found within the sweep budget.
std::optional<Eigen::VectorXd> find_feasible_point(const Polytope& poly,
                                                   double tol = 1e-10,
                                                   int max_sweeps = 5000);

}  // namespace dsafe
