#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dsafe/errors.hpp"

namespace dsafe {

/// Communication graph model: a validated symmetric doubly stochastic mixing
/// matrix plus its derived spectral and metric quantities.
struct NetworkTopology {
  int m = 0;                 // agent count
  Eigen::MatrixXd mixing;    // P, m x m
  double beta = 0.0;         // second largest singular value of P
  int diameter = 0;          // longest shortest path in the support graph

  /// P~ = (I + P) / 2, used by the decentralized least-squares solver.
  Eigen::MatrixXd half_lazy() const {
    return 0.5 * (Eigen::MatrixXd::Identity(m, m) + mixing);
  }
};

/// Checks symmetry, double stochasticity (tolerance 1e-12 after an optional
/// rescale of rows that are within 1e-9 of stochastic), positive diagonal and
/// connectivity; computes beta and the diameter.
/// Throws Error{NotSymmetric|NotDoublyStochastic|ZeroDiagonal|Disconnected}.
NetworkTopology validate_topology(const Eigen::MatrixXd& P);

/// sigma_2(P) of a matrix that passes the validation checks.
double second_largest_singular_value(const Eigen::MatrixXd& P);

/// Exact diameter via all-pairs BFS on the support graph (edges P[i][j] > 0).
int graph_diameter(const NetworkTopology& topology);

/// One synchronous averaging round: out_i = sum_j P[j][i] * values[j].
/// Preserves the network mean exactly up to roundoff.
std::vector<Eigen::VectorXd> mix_step(const std::vector<Eigen::VectorXd>& values,
                                      const NetworkTopology& topology);

/// sum_j |[P^k]_{ji} - 1/m| for agent i; tests assert it <= sqrt(m) beta^k.
double mixing_error(const NetworkTopology& topology, int k, int agent);

/// D_G synchronous rounds of adopting the neighbor estimate with maximal
/// Frobenius norm (ties broken toward the lowest owner index). All agents
/// agree afterwards; returns the common estimate.
Eigen::MatrixXd max_consensus(const std::vector<Eigen::MatrixXd>& estimates,
                              const NetworkTopology& topology);

/// Named generators used by experiment configs.
Eigen::MatrixXd make_mixing_matrix(const std::string& family, int m);

}  // namespace dsafe
