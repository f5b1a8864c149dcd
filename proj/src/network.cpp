#include "dsafe/network.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace dsafe {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kRescaleTol = 1e-9;

// BFS distances from source over the positive-entry support graph.
std::vector<int> bfs_distances(const Eigen::MatrixXd& P, int source) {
  const int m = static_cast<int>(P.rows());
  std::vector<int> dist(m, -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < m; ++v) {
      if (v != u && P(u, v) > 0.0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

NetworkTopology validate_topology(const Eigen::MatrixXd& P) {
  if (P.rows() != P.cols() || P.rows() < 1)
    throw Error(ErrorCode::DimensionMismatch, "mixing matrix must be square");
  if (!P.allFinite())
    throw Error(ErrorCode::NotDoublyStochastic, "mixing matrix has non-finite entries");
  const int m = static_cast<int>(P.rows());

  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (std::abs(P(i, j) - P(j, i)) > kStochasticTol)
        throw Error(ErrorCode::NotSymmetric,
                    "P[" + std::to_string(i) + "][" + std::to_string(j) + "] != P[" +
                        std::to_string(j) + "][" + std::to_string(i) + "]");

  Eigen::MatrixXd Q = P;
  for (int i = 0; i < m; ++i) {
    double row = Q.row(i).sum();
    if (std::abs(row - 1.0) > kRescaleTol)
      throw Error(ErrorCode::NotDoublyStochastic,
                  "row " + std::to_string(i) + " sums to " + std::to_string(row));
    if (std::abs(row - 1.0) > kStochasticTol) Q.row(i) /= row;
  }
  for (int j = 0; j < m; ++j) {
    double col = Q.col(j).sum();
    if (std::abs(col - 1.0) > kRescaleTol)
      throw Error(ErrorCode::NotDoublyStochastic,
                  "column " + std::to_string(j) + " sums to " + std::to_string(col));
  }
  if (Q.minCoeff() < -kStochasticTol)
    throw Error(ErrorCode::NotDoublyStochastic, "negative mixing weight");

  for (int i = 0; i < m; ++i)
    if (Q(i, i) <= 0.0)
      throw Error(ErrorCode::ZeroDiagonal, "agent " + std::to_string(i) + " has no self-loop");

  std::vector<int> dist = bfs_distances(Q, 0);
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; }))
    throw Error(ErrorCode::Disconnected, "support graph is not connected");

  NetworkTopology topology;
  topology.m = m;
  topology.mixing = Q;
  topology.beta = second_largest_singular_value(Q);
  topology.diameter = graph_diameter(topology);
  return topology;
}

double second_largest_singular_value(const Eigen::MatrixXd& P) {
  // P is symmetric here, so its singular values are |eigenvalues|.
  if (P.rows() == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (P + P.transpose()));
  Eigen::VectorXd sv = solver.eigenvalues().cwiseAbs();
  std::sort(sv.data(), sv.data() + sv.size(), std::greater<double>());
  return std::clamp(sv[1], 0.0, 1.0);
}

int graph_diameter(const NetworkTopology& topology) {
  int diameter = 0;
  for (int s = 0; s < topology.m; ++s) {
    std::vector<int> dist = bfs_distances(topology.mixing, s);
    diameter = std::max(diameter, *std::max_element(dist.begin(), dist.end()));
  }
  return diameter;
}

std::vector<Eigen::VectorXd> mix_step(const std::vector<Eigen::VectorXd>& values,
                                      const NetworkTopology& topology) {
  const int m = topology.m;
  if (static_cast<int>(values.size()) != m)
    throw Error(ErrorCode::DimensionMismatch, "expected one vector per agent");
  const Eigen::Index d = values.front().size();
  for (const auto& v : values)
    if (v.size() != d)
      throw Error(ErrorCode::DimensionMismatch, "agent vectors have unequal dimension");

  std::vector<Eigen::VectorXd> out(m, Eigen::VectorXd::Zero(d));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (topology.mixing(j, i) != 0.0) out[i] += topology.mixing(j, i) * values[j];
  return out;
}

double mixing_error(const NetworkTopology& topology, int k, int agent) {
  const int m = topology.m;
  Eigen::MatrixXd power = topology.mixing;
  for (int step = 1; step < k; ++step) power = power * topology.mixing;
  double deviation = 0.0;
  for (int j = 0; j < m; ++j) deviation += std::abs(power(j, agent) - 1.0 / m);
  return deviation;
}

Eigen::MatrixXd max_consensus(const std::vector<Eigen::MatrixXd>& estimates,
                              const NetworkTopology& topology) {
  const int m = topology.m;
  if (static_cast<int>(estimates.size()) != m)
    throw Error(ErrorCode::ShapeMismatch, "expected one estimate per agent");
  const Eigen::Index rows = estimates.front().rows();
  const Eigen::Index cols = estimates.front().cols();
  for (const auto& e : estimates)
    if (e.rows() != rows || e.cols() != cols)
      throw Error(ErrorCode::ShapeMismatch, "estimates have unequal shapes");

  // Each held value carries its owner index so norm ties resolve identically
  // everywhere in the network.
  struct Held {
    double norm;
    int owner;
    const Eigen::MatrixXd* value;
  };
  std::vector<Held> state(m);
  for (int i = 0; i < m; ++i)
    state[i] = {estimates[i].norm(), i, &estimates[i]};

  auto better = [](const Held& a, const Held& b) {
    if (a.norm != b.norm) return a.norm > b.norm;
    return a.owner < b.owner;
  };

  for (int round = 0; round < topology.diameter; ++round) {
    std::vector<Held> next = state;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (topology.mixing(j, i) > 0.0 && better(state[j], next[i])) next[i] = state[j];
    state = std::move(next);
  }
  return *state.front().value;
}

Eigen::MatrixXd make_mixing_matrix(const std::string& family, int m) {
  if (m < 1) throw Error(ErrorCode::ConfigInvalid, "agent count must be >= 1");
  if (m == 1) return Eigen::MatrixXd::Ones(1, 1);

  if (family == "complete") {
    return Eigen::MatrixXd::Constant(m, m, 1.0 / m);
  }
  if (family == "ring") {
    if (m == 2) return Eigen::MatrixXd::Constant(2, 2, 0.5);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      P(i, i) = 0.5;
      P(i, (i + 1) % m) = 0.25;
      P(i, (i + m - 1) % m) = 0.25;
    }
    return P;
  }
  if (family == "path") {
    // Metropolis weights: 1/(1 + max degree) on edges, remainder on the loop.
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i + 1 < m; ++i) {
      P(i, i + 1) = 1.0 / 3.0;
      P(i + 1, i) = 1.0 / 3.0;
    }
    for (int i = 0; i < m; ++i) P(i, i) = 1.0 - P.row(i).sum();
    return P;
  }
  if (family == "star") {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
    for (int leaf = 1; leaf < m; ++leaf) {
      P(0, leaf) = 1.0 / m;
      P(leaf, 0) = 1.0 / m;
      P(leaf, leaf) = 1.0 - 1.0 / m;
    }
    P(0, 0) = 1.0 - P.row(0).sum();
    return P;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown topology family '" + family + "'");
}

}  // namespace dsafe
