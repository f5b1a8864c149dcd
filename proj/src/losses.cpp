#include "dsafe/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dsafe {

namespace {

void check_positive(const Eigen::VectorXd& u, const char* what) {
  if ((u.array() <= 0.0).any())
    throw Error(ErrorCode::DomainViolation,
                std::string(what) + " requires strictly positive coordinates");
}

class QuadraticEntropyMap final : public MirrorMap {
 public:
  Eigen::VectorXd map(const Eigen::VectorXd& x) const override {
    return 0.25 * x.array().square();
  }
  Eigen::VectorXd inverse(const Eigen::VectorXd& u) const override {
    check_positive(u, "q^-1");
    return 2.0 * u.array().sqrt();
  }
  Eigen::VectorXd jacobian_diag(const Eigen::VectorXd& x) const override {
    return 0.5 * x;
  }
  double potential(const Eigen::VectorXd& u) const override {
    check_positive(u, "negative entropy");
    return (u.array() * u.array().log() - u.array()).sum();
  }
  Eigen::VectorXd potential_gradient(const Eigen::VectorXd& u) const override {
    check_positive(u, "negative entropy gradient");
    return u.array().log();
  }
  Eigen::VectorXd hessian_diag(const Eigen::VectorXd& u) const override {
    check_positive(u, "negative entropy Hessian");
    return u.cwiseInverse();
  }
  Eigen::VectorXd mirror_step(const Eigen::VectorXd& u, const Eigen::VectorXd& g,
                              double eta) const override {
    check_positive(u, "mirror step");
    return u.array() * (-eta * g.array()).exp();
  }
  bool positive_domain() const override { return true; }
  std::string name() const override { return "quadratic_entropy"; }
};

class IdentityEuclideanMap final : public MirrorMap {
 public:
  Eigen::VectorXd map(const Eigen::VectorXd& x) const override { return x; }
  Eigen::VectorXd inverse(const Eigen::VectorXd& u) const override { return u; }
  Eigen::VectorXd jacobian_diag(const Eigen::VectorXd& x) const override {
    return Eigen::VectorXd::Ones(x.size());
  }
  double potential(const Eigen::VectorXd& u) const override {
    return 0.5 * u.squaredNorm();
  }
  Eigen::VectorXd potential_gradient(const Eigen::VectorXd& u) const override {
    return u;
  }
  Eigen::VectorXd hessian_diag(const Eigen::VectorXd& u) const override {
    return Eigen::VectorXd::Ones(u.size());
  }
  Eigen::VectorXd mirror_step(const Eigen::VectorXd& u, const Eigen::VectorXd& g,
                              double eta) const override {
    return u - eta * g;
  }
  bool positive_domain() const override { return false; }
  std::string name() const override { return "identity_euclidean"; }
};

// Reflecting random-walk / switching target path inside [lo, hi]^d.
Eigen::MatrixXd drift_path(const DriftSpec& drift, int horizon, Eigen::Index d,
                           const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                           Rng& rng) {
  Eigen::MatrixXd path(horizon, d);
  Eigen::VectorXd c(d);
  for (Eigen::Index j = 0; j < d; ++j) c[j] = rng.uniform(lo[j], hi[j]);

  auto reflect = [&](Eigen::VectorXd v) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double span = hi[j] - lo[j];
      double y = v[j] - lo[j];
      y = std::fmod(y, 2.0 * span);
      if (y < 0.0) y += 2.0 * span;
      v[j] = lo[j] + (y <= span ? y : 2.0 * span - y);
    }
    return v;
  };

  std::vector<int> switch_rounds;
  if (drift.kind == DriftKind::Switching && drift.switch_count > 0) {
    for (int s = 1; s <= drift.switch_count; ++s)
      switch_rounds.push_back(static_cast<int>(
          static_cast<long long>(s) * horizon / (drift.switch_count + 1)));
  }

  std::size_t next_switch = 0;
  for (int t = 0; t < horizon; ++t) {
    if (t > 0) {
      switch (drift.kind) {
        case DriftKind::None:
          break;
        case DriftKind::RandomWalk: {
          Eigen::VectorXd dir = rng.gaussian_vector(d, 1.0);
          double norm = dir.norm();
          if (norm > 0.0) c = reflect(c + (drift.step / norm) * dir);
          break;
        }
        case DriftKind::Switching:
          if (next_switch < switch_rounds.size() && t == switch_rounds[next_switch]) {
            for (Eigen::Index j = 0; j < d; ++j) c[j] = rng.uniform(lo[j], hi[j]);
            ++next_switch;
          }
          break;
      }
    }
    path.row(t) = c.transpose();
  }
  return path;
}

// Fixed zero-mean per-agent offsets with infinity norm <= spread.
std::vector<Eigen::VectorXd> agent_offsets(int m, Eigen::Index d, double spread,
                                           Rng& rng) {
  std::vector<Eigen::VectorXd> offsets(m, Eigen::VectorXd::Zero(d));
  if (m == 1) return offsets;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) offsets[i][j] = rng.uniform(-spread, spread);
    mean += offsets[i];
  }
  mean /= m;
  double max_abs = 0.0;
  for (int i = 0; i < m; ++i) {
    offsets[i] -= mean;
    max_abs = std::max(max_abs, offsets[i].cwiseAbs().maxCoeff());
  }
  if (max_abs > spread)
    for (auto& o : offsets) o *= spread / max_abs;
  return offsets;
}

}  // namespace

std::shared_ptr<const MirrorMap> make_quadratic_entropy_map() {
  return std::make_shared<QuadraticEntropyMap>();
}

std::shared_ptr<const MirrorMap> make_identity_euclidean_map() {
  return std::make_shared<IdentityEuclideanMap>();
}

double bregman(const MirrorMap& mirror, const Eigen::VectorXd& u,
               const Eigen::VectorXd& z) {
  if (u.size() != z.size())
    throw Error(ErrorCode::DimensionMismatch, "bregman arguments differ in dimension");
  return mirror.potential(u) - mirror.potential(z) -
         mirror.potential_gradient(z).dot(u - z);
}

double LossSequence::local_value(int agent, int t, const Eigen::VectorXd& x) const {
  if (kind == LossKind::ConvexTracking)
    return 0.5 * (x - targets[agent].row(t).transpose()).squaredNorm();
  return tilde_value(agent, t, mirror->map(x));
}

Eigen::VectorXd LossSequence::local_gradient(int agent, int t,
                                             const Eigen::VectorXd& x) const {
  if (kind == LossKind::ConvexTracking)
    return x - targets[agent].row(t).transpose();
  Eigen::VectorXd u = mirror->map(x);
  return mirror->jacobian_diag(x).cwiseProduct(tilde_gradient(agent, t, u));
}

double LossSequence::global_value(int t, const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (int i = 0; i < m; ++i) total += local_value(i, t, x);
  return total;
}

double LossSequence::tilde_value(int agent, int t, const Eigen::VectorXd& u) const {
  return 0.5 * (u - targets[agent].row(t).transpose()).squaredNorm();
}

Eigen::VectorXd LossSequence::tilde_gradient(int agent, int t,
                                             const Eigen::VectorXd& u) const {
  return u - targets[agent].row(t).transpose();
}

Scenario make_convex_tracking(const ConvexScenarioParams& params, Rng& rng) {
  const Eigen::Index d = params.d;
  const double w = params.box_halfwidth;
  if (params.d < 1 || params.m < 1 || params.horizon < 1 || w <= 0.0)
    throw Error(ErrorCode::ConfigInvalid, "convex scenario parameters out of range");

  const Eigen::Index n = 2 * d + params.extra_rows;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd b(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    A(2 * j, j) = 1.0;
    b[2 * j] = w;
    A(2 * j + 1, j) = -1.0;
    b[2 * j + 1] = w;
  }
  // Extra faces keep the baseline and the target region strictly inside.
  for (int k = 0; k < params.extra_rows; ++k) {
    Eigen::VectorXd a = rng.gaussian_vector(d, 1.0);
    if (a.norm() < 1e-12) a = Eigen::VectorXd::Unit(d, 0);
    a.normalize();
    const double support = w * a.cwiseAbs().sum();  // max of a'x over the box
    A.row(2 * d + k) = a.transpose();
    b[2 * d + k] = rng.uniform(0.55, 0.95) * support;
  }

  Scenario scenario;
  scenario.truth = Polytope{A, b};
  scenario.baseline = Eigen::VectorXd::Zero(d);
  scenario.baseline_offsets = Eigen::VectorXd::Zero(n);
  scenario.safety_gap = b.minCoeff();
  scenario.L = w * std::sqrt(static_cast<double>(d));
  scenario.L_A = 1.0;

  // Targets drift inside ||x||_inf <= fraction * w; the extra faces keep at
  // least 0.55 of their support, so the default region has true-set margin.
  const double region = params.target_region_fraction * w;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(d, -region);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(d, region);

  // The drift path stays inside the region box by reflection, so checking
  // the box corners certifies every global minimizer of the sequence.
  const long corners = 1L << d;
  for (long c = 0; c < corners; ++c) {
    Eigen::VectorXd corner(d);
    for (Eigen::Index j = 0; j < d; ++j) corner[j] = (c >> j) & 1 ? hi[j] : lo[j];
    if (scenario.truth.violation(corner) > -0.05 * w)
      throw Error(ErrorCode::TargetsOutsideSafeSet,
                  "target region leaves the interior margin of the feasible set");
  }

  Eigen::MatrixXd center_path = drift_path(params.drift, params.horizon, d, lo, hi, rng);
  std::vector<Eigen::VectorXd> offsets = agent_offsets(params.m, d, 0.1 * w, rng);

  LossSequence& seq = scenario.losses;
  seq.kind = LossKind::ConvexTracking;
  seq.m = params.m;
  seq.horizon = params.horizon;
  seq.d = d;
  seq.targets.reserve(params.m);
  for (int i = 0; i < params.m; ++i) {
    Eigen::MatrixXd theta = center_path;
    theta.rowwise() += offsets[i].transpose();
    seq.targets.push_back(std::move(theta));
  }
  // ||grad f_{i,t}(x)|| = ||x - theta|| over the true set
  seq.G = scenario.L + (region + 0.1 * w) * std::sqrt(static_cast<double>(d));
  return scenario;
}

Scenario make_nonconvex_family(const NonconvexScenarioParams& params, Rng& rng) {
  const Eigen::Index d = params.d;
  if (params.box_lo <= 0.0)
    throw Error(ErrorCode::DomainNotPositive, "box must lie in the positive orthant");
  if (params.box_hi <= params.box_lo)
    throw Error(ErrorCode::ConfigInvalid, "box upper bound must exceed lower bound");
  if (params.box_hi > 2.0)
    throw Error(ErrorCode::ConfigInvalid,
                "box upper bound above 2 breaks 1-strong convexity of the potential on q(box)");

  const Eigen::Index n = 2 * d;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd b(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    A(2 * j, j) = 1.0;
    b[2 * j] = params.box_hi;
    A(2 * j + 1, j) = -1.0;
    b[2 * j + 1] = -params.box_lo;
  }

  Scenario scenario;
  scenario.truth = Polytope{A, b};
  scenario.box_lo = Eigen::VectorXd::Constant(d, params.box_lo);
  scenario.box_hi = Eigen::VectorXd::Constant(d, params.box_hi);
  scenario.baseline = 0.5 * (scenario.box_lo + scenario.box_hi);
  scenario.baseline_offsets = A * scenario.baseline;
  scenario.safety_gap = (b - scenario.baseline_offsets).minCoeff();
  scenario.L = params.box_hi * std::sqrt(static_cast<double>(d));
  scenario.L_A = 1.0;

  auto mirror = make_quadratic_entropy_map();
  Eigen::VectorXd u_lo = mirror->map(scenario.box_lo);
  Eigen::VectorXd u_hi = mirror->map(scenario.box_hi);

  // psi targets drift inside the middle band of the u-box.
  Eigen::VectorXd band_lo = u_lo + 0.2 * (u_hi - u_lo);
  Eigen::VectorXd band_hi = u_lo + 0.8 * (u_hi - u_lo);
  Eigen::MatrixXd center_path =
      drift_path(params.drift, params.horizon, d, band_lo, band_hi, rng);
  const double spread = 0.1 * (u_hi[0] - u_lo[0]);
  std::vector<Eigen::VectorXd> offsets = agent_offsets(params.m, d, spread, rng);

  LossSequence& seq = scenario.losses;
  seq.kind = LossKind::NonconvexReparameterized;
  seq.m = params.m;
  seq.horizon = params.horizon;
  seq.d = d;
  seq.mirror = mirror;
  seq.u_lo = u_lo;
  seq.u_hi = u_hi;
  seq.targets.reserve(params.m);
  for (int i = 0; i < params.m; ++i) {
    Eigen::MatrixXd psi = center_path;
    psi.rowwise() += offsets[i].transpose();
    for (int t = 0; t < params.horizon; ++t)
      for (Eigen::Index j = 0; j < d; ++j)
        psi(t, j) = std::clamp(psi(t, j), band_lo[j] - spread, band_hi[j] + spread);
    seq.targets.push_back(std::move(psi));
  }

  const double u_span = (u_hi - u_lo).norm();
  seq.G_F = u_span + spread * std::sqrt(static_cast<double>(d));
  seq.G = 0.5 * params.box_hi * seq.G_F;

  // W covers the Lipschitz/derivative bounds of q, q^-1 and phi on the box.
  const double ul = u_lo.minCoeff();
  seq.W = std::max({1.0 + 1e-9, 0.5 * params.box_hi, std::abs(std::log(ul)),
                    1.0 / (ul * ul), 1.0 / std::sqrt(ul),
                    0.5 / (ul * std::sqrt(ul))});

  // D_phi is separately convex in each argument, so the supremum over the
  // u-box is attained at a corner pair.
  double d_prime = 0.0;
  const long corners = 1L << d;
  for (long cu = 0; cu < corners; ++cu)
    for (long cz = 0; cz < corners; ++cz) {
      Eigen::VectorXd u(d), z(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        u[j] = (cu >> j) & 1 ? u_hi[j] : u_lo[j];
        z[j] = (cz >> j) & 1 ? u_hi[j] : u_lo[j];
      }
      d_prime = std::max(d_prime, bregman(*mirror, u, z));
    }
  seq.D_prime = d_prime;
  return scenario;
}

Eigen::VectorXd hindsight_minimizer(const LossSequence& seq, int t,
                                    const Polytope& truth, double tol) {
  if (t < 0 || t >= seq.horizon)
    throw Error(ErrorCode::HorizonMismatch, "round outside the loss horizon");

  if (seq.kind == LossKind::NonconvexReparameterized) {
    // Separable quadratic over the q-image box: clamp the mean target.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(seq.d);
    for (int i = 0; i < seq.m; ++i) mean += seq.targets[i].row(t).transpose();
    mean /= seq.m;
    Eigen::VectorXd u_star = mean.cwiseMax(seq.u_lo).cwiseMin(seq.u_hi);
    return seq.mirror->inverse(u_star);
  }

  // Projected gradient descent on the true polytope; the global loss is
  // m-strongly convex so step 1/m settles in a couple of iterations.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(seq.d);
  for (int i = 0; i < seq.m; ++i) mean += seq.targets[i].row(t).transpose();
  mean /= seq.m;

  const double step = 1.0 / seq.m;
  Eigen::VectorXd x = project_polytope(truth, mean, tol * 1e-2);
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd grad = seq.m * (x - mean);
    Eigen::VectorXd next = project_polytope(truth, x - step * grad, tol * 1e-2);
    double mapping = (x - next).norm() / step;
    x = next;
    if (mapping <= tol) return x;
  }
  throw Error(ErrorCode::NoConvergence, "projected gradient descent stalled");
}

MinimizerTrace compute_minimizer_trace(const LossSequence& seq, const Polytope& truth,
                                       double tol) {
  MinimizerTrace trace;
  trace.x_star.reserve(seq.horizon);
  for (int t = 0; t < seq.horizon; ++t)
    trace.x_star.push_back(hindsight_minimizer(seq, t, truth, tol));
  return trace;
}

double path_length(const MinimizerTrace& trace) {
  double total = 0.0;
  for (std::size_t t = 1; t < trace.x_star.size(); ++t)
    total += (trace.x_star[t] - trace.x_star[t - 1]).norm();
  return total;
}

}  // namespace dsafe
