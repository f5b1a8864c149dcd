#include "dsafe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsafe {

namespace {

void check_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got)
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected dimension " + std::to_string(expected) +
                    ", got " + std::to_string(got));
}

// Generic Dykstra loop over a family of projectors. `project(k, v)` must be
// the exact projection of v onto the k-th set.
template <typename ProjectFn>
Eigen::VectorXd dykstra(Eigen::Index num_sets, const Eigen::VectorXd& z,
                        const ProjectFn& project, double tol, int max_iter,
                        ProjectionLog* log, auto&& violation) {
  Eigen::VectorXd x = z;
  std::vector<Eigen::VectorXd> corrections(num_sets, Eigen::VectorXd::Zero(z.size()));
  double change = 0.0, viol = 0.0;
  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    // The iterate can stall for whole sweeps while the corrections still
    // move, so convergence is measured on both.
    change = 0.0;
    Eigen::VectorXd x_prev = x;
    for (Eigen::Index k = 0; k < num_sets; ++k) {
      Eigen::VectorXd shifted = x + corrections[k];
      Eigen::VectorXd projected = project(k, shifted);
      change += (shifted - projected - corrections[k]).norm();
      corrections[k] = shifted - projected;
      x = std::move(projected);
    }
    change += (x - x_prev).norm();
    viol = violation(x);
    if (change <= tol && viol <= tol) {
      if (log) log->push_back({sweep, std::max(viol, 0.0)});
      return x;
    }
  }
  throw Error(ErrorCode::MaxIterationsExceeded,
              "projection stalled: change " + std::to_string(change) + ", violation " +
                  std::to_string(viol));
}

}  // namespace

bool contains(const Polytope& set, const Eigen::VectorXd& x, double tol) {
  check_dim(set.dim(), x.size(), "contains");
  if (tol < 0.0) throw Error(ErrorCode::NonpositiveInput, "tolerance must be >= 0");
  return set.violation(x) <= tol;
}

bool contains(const RobustSafeSet& set, const Eigen::VectorXd& x, double tol) {
  check_dim(set.dim(), x.size(), "contains");
  if (tol < 0.0) throw Error(ErrorCode::NonpositiveInput, "tolerance must be >= 0");
  return set.violation(x) <= tol;
}

Eigen::VectorXd project_halfspace(const Eigen::VectorXd& a, double b,
                                  const Eigen::VectorXd& z) {
  const double norm_sq = a.squaredNorm();
  if (norm_sq == 0.0) throw Error(ErrorCode::ZeroNormal, "constraint normal is zero");
  const double slack = a.dot(z) - b;
  if (slack <= 0.0) return z;
  return z - (slack / norm_sq) * a;
}

Eigen::VectorXd project_polytope(const Polytope& poly, const Eigen::VectorXd& z,
                                 double tol, int max_iter, ProjectionLog* log) {
  check_dim(poly.dim(), z.size(), "project_polytope");
  if (poly.violation(z) <= 0.0) return z;
  return dykstra(
      poly.num_constraints(), z,
      [&](Eigen::Index k, const Eigen::VectorXd& v) {
        return project_halfspace(poly.A.row(k).transpose(), poly.b[k], v);
      },
      tol, max_iter, log, [&](const Eigen::VectorXd& x) { return poly.violation(x); });
}

Eigen::VectorXd project_cone_constraint(const Eigen::VectorXd& a_hat, double b,
                                        double radius, const Eigen::VectorXd& z,
                                        double tol) {
  if (radius < 0.0) throw Error(ErrorCode::NonpositiveInput, "radius must be >= 0");
  if (radius == 0.0) return project_halfspace(a_hat, b, z);

  const double a_norm = a_hat.norm();
  if (b < 0.0 && a_norm <= radius)
    throw Error(ErrorCode::InfeasibleConstraintSet,
                "constraint {a'x + r||x|| <= b} is empty: b < 0 and ||a|| <= r");

  auto constraint = [&](const Eigen::VectorXd& x) {
    return a_hat.dot(x) + radius * x.norm() - b;
  };
  if (constraint(z) <= 0.0) return z;

  // Stationarity of 0.5||x-z||^2 + mu (a'x + r||x|| - b) gives
  // x = w * (||w|| - mu r)_+ / ||w|| with w = z - mu a. The norm equation is a
  // fixed point solved to 1e-12 (it is constant in the iterate, so it settles
  // in one pass; the loop keeps the contract explicit).
  auto x_of_mu = [&](double mu) -> Eigen::VectorXd {
    Eigen::VectorXd w = z - mu * a_hat;
    const double w_norm = w.norm();
    double r = w_norm;
    for (int it = 0; it < 64; ++it) {
      double next = std::max(0.0, w_norm - mu * radius);
      bool done = std::abs(next - r) <= 1e-12 * std::max(1.0, std::abs(r));
      r = next;
      if (done) break;
    }
    if (r <= 0.0 || w_norm == 0.0) return Eigen::VectorXd::Zero(z.size());
    return (r / w_norm) * w;
  };

  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (constraint(x_of_mu(hi)) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200)
      throw Error(ErrorCode::NoConvergence, "dual multiplier bracket did not close");
  }
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double res = constraint(x_of_mu(mid));
    if (res > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= tol * 1e-3 * std::max(1.0, hi)) break;
  }
  return x_of_mu(hi);  // feasible side of the bracket
}

Eigen::VectorXd project_robust_set(const RobustSafeSet& set, const Eigen::VectorXd& z,
                                   double tol, int max_iter, ProjectionLog* log) {
  check_dim(set.dim(), z.size(), "project_robust_set");
  if (set.mode == RobustMode::ConservativePolytope)
    return project_polytope(set.conservative_polytope(), z, tol, max_iter, log);

  if (set.violation(z) <= 0.0) return z;
  if (set.num_constraints() == 1)
    return project_cone_constraint(set.A_hat.row(0).transpose(), set.b[0], set.radius,
                                   z, tol);
  return dykstra(
      set.num_constraints(), z,
      [&](Eigen::Index k, const Eigen::VectorXd& v) {
        return project_cone_constraint(set.A_hat.row(k).transpose(), set.b[k],
                                       set.radius, v, tol * 1e-2);
      },
      tol, max_iter, log, [&](const Eigen::VectorXd& x) { return set.violation(x); });
}

Polytope shrink_polytope(const Polytope& poly, double tau_in) {
  if (tau_in <= 0.0) throw Error(ErrorCode::NonpositiveInput, "tau_in must be > 0");
  Polytope shrunk{poly.A, poly.b.array() - tau_in};
  if (!find_feasible_point(shrunk))
    throw Error(ErrorCode::EmptyShrunkSet,
                "no feasible point after tightening offsets by " + std::to_string(tau_in));
  return shrunk;
}

std::optional<Eigen::VectorXd> find_feasible_point(const Polytope& poly, double tol,
                                                   int max_sweeps) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(poly.dim());
  if (poly.violation(x) <= tol) return x;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index k = 0; k < poly.num_constraints(); ++k)
      x = project_halfspace(poly.A.row(k).transpose(), poly.b[k], x);
    if (poly.violation(x) <= tol) return x;
  }
  return std::nullopt;
}

}  // namespace dsafe
