#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "dsafe/geometry.hpp"
#include "dsafe/network.hpp"
#include "dsafe/rng.hpp"

// Independent oracles used to freeze expected values. These deliberately take
// the dumb route (enumeration, dense grids, direct powering) so they share no
// code path with the implementations they check.
namespace oracle {

// Nearest point of {Ax <= b} to z by enumerating candidate active sets and
// solving each equality-constrained least-squares subproblem.
inline Eigen::VectorXd active_set_projection(const dsafe::Polytope& poly,
                                             const Eigen::VectorXd& z) {
  const Eigen::Index n = poly.num_constraints();
  const Eigen::Index d = poly.dim();
  double best_dist = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    std::vector<Eigen::Index> subset;
    for (Eigen::Index k = 0; k < n; ++k)
      if ((mask >> k) & 1UL) subset.push_back(k);
    Eigen::VectorXd x;
    if (subset.empty()) {
      x = z;
    } else {
      Eigen::MatrixXd As(subset.size(), d);
      Eigen::VectorXd bs(subset.size());
      for (std::size_t r = 0; r < subset.size(); ++r) {
        As.row(r) = poly.A.row(subset[r]);
        bs[r] = poly.b[subset[r]];
      }
      Eigen::MatrixXd gram = As * As.transpose();
      Eigen::VectorXd mu =
          gram.completeOrthogonalDecomposition().solve(As * z - bs);
      x = z - As.transpose() * mu;
      if ((As * x - bs).cwiseAbs().maxCoeff() > 1e-8) continue;  // inconsistent set
    }
    if (poly.violation(x) <= 1e-9) {
      const double dist = (x - z).norm();
      if (dist < best_dist - 1e-14) {
        best_dist = dist;
        best = x;
      }
    }
  }
  return best;
}

// Residual of the best nonnegative combination of the given normals matching
// v, by support enumeration (exact for small constraint counts).
inline double nonneg_combination_residual(const Eigen::MatrixXd& normals,
                                          const Eigen::VectorXd& v) {
  const Eigen::Index n = normals.rows();
  double best = v.norm();  // empty support
  for (unsigned long mask = 1; mask < (1UL << n); ++mask) {
    std::vector<Eigen::Index> subset;
    for (Eigen::Index k = 0; k < n; ++k)
      if ((mask >> k) & 1UL) subset.push_back(k);
    Eigen::MatrixXd As(subset.size(), normals.cols());
    for (std::size_t r = 0; r < subset.size(); ++r) As.row(r) = normals.row(subset[r]);
    Eigen::MatrixXd gram = As * As.transpose();
    Eigen::VectorXd mu = gram.completeOrthogonalDecomposition().solve(As * v);
    if (mu.minCoeff() < -1e-10) continue;
    best = std::min(best, (v - As.transpose() * mu).norm());
  }
  return best;
}

// Dense-grid minimizer of ||x - z|| over a feasible region in 2-D, followed
// by local grid refinement around the best cell.
template <typename FeasibleFn>
Eigen::Vector2d grid_projection_2d(const FeasibleFn& feasible, const Eigen::Vector2d& z,
                                   double lo, double hi, int cells = 2000,
                                   int refinements = 40) {
  Eigen::Vector2d best = Eigen::Vector2d::Zero();
  double best_dist = std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / cells;
  for (int i = 0; i <= cells; ++i)
    for (int j = 0; j <= cells; ++j) {
      Eigen::Vector2d x(lo + i * step, lo + j * step);
      if (!feasible(x)) continue;
      const double dist = (x - z).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = x;
      }
    }
  double h = 4.0 * step;
  for (int r = 0; r < refinements; ++r) {
    // re-center at this scale until stable, so the search can slide along a
    // constraint boundary, then halve the window
    for (int pass = 0; pass < 200; ++pass) {
      Eigen::Vector2d center = best;
      for (int i = -20; i <= 20; ++i)
        for (int j = -20; j <= 20; ++j) {
          Eigen::Vector2d x = center + Eigen::Vector2d(i * h / 20.0, j * h / 20.0);
          if (!feasible(x)) continue;
          const double dist = (x - z).norm();
          if (dist < best_dist) {
            best_dist = dist;
            best = x;
          }
        }
      if ((best - center).norm() <= h / 40.0) break;
    }
    h *= 0.5;
  }
  return best;
}

// Central finite differences of a scalar function.
template <typename Fn>
Eigen::VectorXd fd_gradient(const Fn& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd hi = x, lo = x;
    hi[j] += h;
    lo[j] -= h;
    g[j] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Direct k-th matrix power by repeated multiplication.
inline Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& P, int k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  for (int i = 0; i < k; ++i) out = out * P;
  return out;
}

}  // namespace oracle

namespace testgen {

// Random connected Metropolis-weighted mixing matrix: ring skeleton plus
// random chords, edge weight 1/(1 + max degree), remainder on the diagonal.
inline Eigen::MatrixXd random_metropolis_matrix(int m, dsafe::Rng& rng,
                                                double extra_edge_prob = 0.3) {
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(m, m);
  for (int i = 0; i < m; ++i) adj(i, (i + 1) % m) = adj((i + 1) % m, i) = 1;
  for (int i = 0; i < m; ++i)
    for (int j = i + 2; j < m; ++j)
      if (rng.uniform() < extra_edge_prob) adj(i, j) = adj(j, i) = 1;
  Eigen::VectorXi degree = adj.rowwise().sum();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (adj(i, j)) P(i, j) = 1.0 / (1 + std::max(degree[i], degree[j]));
  for (int i = 0; i < m; ++i) P(i, i) = 1.0 - P.row(i).sum();
  return P;
}

// Bounded random polytope: scaled box rows plus random extra faces that keep
// the origin strictly feasible.
inline dsafe::Polytope random_polytope(int d, int extra_rows, dsafe::Rng& rng,
                                       double halfwidth = 1.0) {
  const Eigen::Index n = 2 * d + extra_rows;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd b(n);
  for (int j = 0; j < d; ++j) {
    A(2 * j, j) = 1.0;
    b[2 * j] = halfwidth * rng.uniform(0.8, 1.2);
    A(2 * j + 1, j) = -1.0;
    b[2 * j + 1] = halfwidth * rng.uniform(0.8, 1.2);
  }
  for (int k = 0; k < extra_rows; ++k) {
    Eigen::VectorXd a = rng.gaussian_vector(d, 1.0);
    if (a.norm() < 1e-9) a = Eigen::VectorXd::Unit(d, 0);
    a.normalize();
    A.row(2 * d + k) = a.transpose();
    b[2 * d + k] = halfwidth * rng.uniform(0.3, 1.5);
  }
  return dsafe::Polytope{A, b};
}

}  // namespace testgen
