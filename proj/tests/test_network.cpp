#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "dsafe/network.hpp"
#include "test_support.hpp"

using namespace dsafe;

namespace {

Eigen::MatrixXd from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd M(n, n);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) M(i, j++) = v;
    ++i;
  }
  return M;
}

ErrorCode thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST_CASE("validate_topology accepts the rank-1 averaging matrix") {
  auto topo = validate_topology(from_rows({{0.5, 0.5}, {0.5, 0.5}}));
  CHECK(topo.m == 2);
  CHECK(topo.beta == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(topo.diameter == 1);
}

TEST_CASE("validate_topology rejects the identity as disconnected") {
  CHECK(thrown_code([] { validate_topology(from_rows({{1, 0}, {0, 1}})); }) ==
        ErrorCode::Disconnected);
}

TEST_CASE("validate_topology names the first violated invariant") {
  CHECK(thrown_code([] { validate_topology(from_rows({{0.5, 0.4}, {0.5, 0.6}})); }) ==
        ErrorCode::NotSymmetric);
  CHECK(thrown_code([] { validate_topology(from_rows({{0.7, 0.4}, {0.4, 0.7}})); }) ==
        ErrorCode::NotDoublyStochastic);
  CHECK(thrown_code([] { validate_topology(from_rows({{0.0, 1.0}, {1.0, 0.0}})); }) ==
        ErrorCode::ZeroDiagonal);
  CHECK(thrown_code([] {
    validate_topology(from_rows({{0.5, 0.5, 0.0, 0.0},
                                 {0.5, 0.5, 0.0, 0.0},
                                 {0.0, 0.0, 0.5, 0.5},
                                 {0.0, 0.0, 0.5, 0.5}}));
  }) == ErrorCode::Disconnected);
}

TEST_CASE("second_largest_singular_value on closed-form cases") {
  CHECK(second_largest_singular_value(from_rows({{0.5, 0.5}, {0.5, 0.5}})) ==
        doctest::Approx(0.0).epsilon(1e-10));
  CHECK(second_largest_singular_value(from_rows({{0.75, 0.25}, {0.25, 0.75}})) ==
        doctest::Approx(0.5).epsilon(1e-10));
  // 3-ring with self weight 1/2: circulant eigenvalues {1, 1/4, 1/4}, golden
  // value frozen from the characteristic-polynomial oracle.
  CHECK(second_largest_singular_value(make_mixing_matrix("ring", 3)) ==
        doctest::Approx(0.25).epsilon(1e-10));
  for (int m : {2, 3, 5, 8})
    CHECK(second_largest_singular_value(make_mixing_matrix("complete", m)) ==
          doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("graph_diameter on named families") {
  CHECK(validate_topology(make_mixing_matrix("path", 3)).diameter == 2);
  CHECK(validate_topology(make_mixing_matrix("complete", 5)).diameter == 1);
  CHECK(validate_topology(make_mixing_matrix("ring", 6)).diameter == 3);
  CHECK(validate_topology(make_mixing_matrix("star", 6)).diameter == 2);
  CHECK(validate_topology(Eigen::MatrixXd::Ones(1, 1)).diameter == 0);
}

TEST_CASE("mix_step fixes consensus states and preserves the mean") {
  auto topo = validate_topology(make_mixing_matrix("ring", 5));
  Eigen::VectorXd v(2);
  v << 1.5, -2.0;
  std::vector<Eigen::VectorXd> same(5, v);
  for (const auto& out : mix_step(same, topo)) CHECK((out - v).norm() < 1e-14);

  auto flat = validate_topology(from_rows({{0.5, 0.5}, {0.5, 0.5}}));
  std::vector<Eigen::VectorXd> values{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  auto mixed = mix_step(values, flat);
  CHECK((mixed[0] - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);
  CHECK((mixed[1] - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto random_topo = validate_topology(testgen::random_metropolis_matrix(6, rng));
    std::vector<Eigen::VectorXd> inputs;
    Eigen::VectorXd mean_in = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 6; ++i) {
      inputs.push_back(rng.gaussian_vector(3, 2.0));
      mean_in += inputs.back();
    }
    mean_in /= 6.0;
    auto outputs = mix_step(inputs, random_topo);
    Eigen::VectorXd mean_out = Eigen::VectorXd::Zero(3);
    for (const auto& out : outputs) mean_out += out;
    mean_out /= 6.0;
    CHECK((mean_out - mean_in).norm() <= 1e-12 * std::max(1.0, mean_in.norm()));
  }
}

TEST_CASE("mix_step rejects ragged inputs") {
  auto topo = validate_topology(make_mixing_matrix("complete", 2));
  std::vector<Eigen::VectorXd> bad{Eigen::Vector2d(1, 0), Eigen::Vector3d(0, 1, 2)};
  CHECK(thrown_code([&] { mix_step(bad, topo); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("mixing_error matches direct powering and the spectral bound") {
  // rank-1: exactly zero deviation at any power
  auto flat = validate_topology(make_mixing_matrix("complete", 4));
  for (int k : {1, 3, 10}) CHECK(mixing_error(flat, k, 2) <= 1e-13);

  auto two = validate_topology(from_rows({{0.75, 0.25}, {0.25, 0.75}}));
  CHECK(mixing_error(two, 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(0.5 <= std::sqrt(2.0) * two.beta + 1e-12);

  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto topo = validate_topology(testgen::random_metropolis_matrix(7, rng));
    const double root_m = std::sqrt(7.0);
    for (int k = 1; k <= 20; ++k) {
      Eigen::MatrixXd direct = oracle::matrix_power(topo.mixing, k);
      for (int i = 0; i < 7; ++i) {
        double expected = 0.0;
        for (int j = 0; j < 7; ++j) expected += std::abs(direct(j, i) - 1.0 / 7.0);
        const double got = mixing_error(topo, k, i);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
        CHECK(got <= root_m * std::pow(topo.beta, k) + 1e-13);
      }
    }
  }
}

TEST_CASE("beta orders the fixed complete/ring/path family on m=6") {
  const double complete = validate_topology(make_mixing_matrix("complete", 6)).beta;
  const double ring = validate_topology(make_mixing_matrix("ring", 6)).beta;
  const double path = validate_topology(make_mixing_matrix("path", 6)).beta;
  CHECK(complete == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(complete < ring);
  CHECK(ring < path);
}

TEST_CASE("max_consensus spreads the maximal-norm estimate in D_G rounds") {
  auto topo = validate_topology(make_mixing_matrix("ring", 5));
  std::vector<Eigen::MatrixXd> estimates;
  for (int i = 0; i < 5; ++i)
    estimates.push_back(Eigen::MatrixXd::Constant(2, 2, 0.1 * (i + 1)));
  estimates[2] *= 10.0;  // clear winner
  Eigen::MatrixXd winner = max_consensus(estimates, topo);
  CHECK((winner - estimates[2]).norm() == 0.0);

  // idempotence: feeding back the common estimate changes nothing
  std::vector<Eigen::MatrixXd> again(5, winner);
  CHECK((max_consensus(again, topo) - winner).norm() == 0.0);
}

TEST_CASE("max_consensus breaks norm ties toward the lower owner index") {
  auto topo = validate_topology(make_mixing_matrix("ring", 4));
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd b(2, 2);
  b << 0, 1, 1, 0;  // same Frobenius norm as identity
  std::vector<Eigen::MatrixXd> estimates{Eigen::MatrixXd::Zero(2, 2), b, a,
                                         Eigen::MatrixXd::Zero(2, 2)};
  CHECK((max_consensus(estimates, topo) - b).norm() == 0.0);
}

TEST_CASE("max_consensus rejects mismatched shapes") {
  auto topo = validate_topology(make_mixing_matrix("complete", 2));
  std::vector<Eigen::MatrixXd> bad{Eigen::MatrixXd::Zero(2, 2),
                                   Eigen::MatrixXd::Zero(3, 2)};
  CHECK(thrown_code([&] { max_consensus(bad, topo); }) == ErrorCode::ShapeMismatch);
}
