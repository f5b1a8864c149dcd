#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dsafe/experiment.hpp"
#include "test_support.hpp"

using namespace dsafe;

namespace {

ErrorCode thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ConfigInvalid;
}

std::string base_config_json(int m, int d, int T, const std::string& kind,
                             const std::string& extra = "") {
  return std::string("{\"version\":1,") + "\"scenario\":{\"kind\":\"" + kind +
         "\",\"d\":" + std::to_string(d) + ",\"m\":" + std::to_string(m) +
         ",\"T\":" + std::to_string(T) +
         ",\"extra_rows\":2,\"drift\":{\"type\":\"none\"}}," +
         "\"topology\":{\"generator\":\"ring\",\"m\":" + std::to_string(m) + "}," +
         "\"estimation\":{\"R\":0.05,\"lambda\":0.02,\"projection_mode\":"
         "\"conservative\"}," +
         "\"seeds\":[7]" + extra + "}";
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dsafe_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("compute_regret zeroes out when every agent plays the comparator") {
  ConvexScenarioParams params;
  params.d = 2;
  params.m = 2;
  params.horizon = 40;
  Rng rng(3);
  auto scenario = std::make_shared<Scenario>(make_convex_tracking(params, rng));
  MinimizerTrace trace = compute_minimizer_trace(scenario->losses, scenario->truth);

  RunRecord record;
  record.scenario = scenario;
  record.T = 40;
  record.m = 2;
  record.optimization_start = 0;
  record.phase.assign(40, Phase::Optimize);
  record.actions.assign(40, Eigen::MatrixXd::Zero(2, 2));
  record.local_loss.setZero(40, 2);
  record.global_loss.setZero(40, 2);
  record.slack.setZero(40, 2);
  record.disagreement.assign(40, 0.0);
  record.deviation.assign(40, 0.0);
  for (int t = 0; t < 40; ++t)
    for (int i = 0; i < 2; ++i) {
      record.actions[t].row(i) = trace.x_star[t].transpose();
      record.global_loss(t, i) = scenario->losses.global_value(t, trace.x_star[t]);
      record.slack(t, i) =
          (scenario->truth.b - scenario->truth.A * trace.x_star[t]).minCoeff();
    }
  RegretReport report = compute_regret(record, trace);
  for (double r : report.regret) CHECK(std::abs(r) <= 1e-10);
  CHECK(report.violation_count == 0);
}

TEST_CASE("compute_regret on a one-round fixture gives the loss gap") {
  // single agent, f(x) = 0.5||x||^2, action (1,0), minimizer at the origin
  auto scenario = std::make_shared<Scenario>();
  Eigen::MatrixXd A(4, 2);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  scenario->truth = Polytope{A, Eigen::VectorXd::Constant(4, 2.0)};
  scenario->baseline = Eigen::Vector2d::Zero();
  scenario->baseline_offsets = Eigen::VectorXd::Zero(4);
  scenario->safety_gap = 2.0;
  scenario->L = 2.0 * std::sqrt(2.0);
  scenario->L_A = 1.0;
  scenario->losses.kind = LossKind::ConvexTracking;
  scenario->losses.m = 1;
  scenario->losses.horizon = 1;
  scenario->losses.d = 2;
  scenario->losses.G = 4.0;
  scenario->losses.targets = {Eigen::MatrixXd::Zero(1, 2)};

  MinimizerTrace trace;
  trace.x_star = {Eigen::Vector2d::Zero()};

  RunRecord record;
  record.scenario = scenario;
  record.T = 1;
  record.m = 1;
  record.optimization_start = 0;
  record.phase = {Phase::Optimize};
  record.actions = {Eigen::MatrixXd::Zero(1, 2)};
  record.actions[0] << 1.0, 0.0;
  record.local_loss.setZero(1, 1);
  record.global_loss.setConstant(1, 1, 0.5);
  record.slack.setConstant(1, 1, 1.0);
  record.disagreement = {0.0};
  record.deviation = {0.0};

  RegretReport report = compute_regret(record, trace);
  CHECK(report.regret[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("full pipeline: regret matches an independent recomputation") {
  ExperimentConfig config = parse_config(base_config_json(1, 2, 300, "convex_tracking"));
  config.topology.family = "complete";
  RunArtifacts artifacts = run_single(config, 7);

  // hand-rolled regret from the recorded actions and the loss definition
  const Scenario& scenario = *artifacts.scenario;
  double regret = 0.0;
  for (int t = 0; t < artifacts.record.T; ++t) {
    double at_action = 0.0, at_star = 0.0;
    for (int i = 0; i < scenario.losses.m; ++i) {
      at_action += 0.5 * (artifacts.record.actions[t].row(0).transpose() -
                          scenario.losses.targets[i].row(t).transpose())
                             .squaredNorm();
      at_star += 0.5 * (artifacts.trace.x_star[t] -
                        scenario.losses.targets[i].row(t).transpose())
                           .squaredNorm();
    }
    regret += at_action - at_star;
  }
  CHECK(artifacts.report.regret[0] == doctest::Approx(regret).epsilon(1e-10));

  // reports are pure functions of record + trace
  RegretReport again = compute_regret(artifacts.record, artifacts.trace);
  CHECK(again.regret[0] == artifacts.report.regret[0]);
  CHECK(again.decomposition_gap == artifacts.report.decomposition_gap);
}

TEST_CASE("decomposition identity holds on convex and nonconvex pipelines") {
  for (const std::string kind : {"convex_tracking", "nonconvex_box"}) {
    const int T = kind == "convex_tracking" ? 400 : 2000;
    ExperimentConfig config = parse_config(base_config_json(3, 2, T, kind));
    RunArtifacts artifacts = run_single(config, 11);
    CHECK(artifacts.report.decomposition_available);
    CHECK(artifacts.report.decomposition_gap <= 1e-8);
  }
}

TEST_CASE("safety_audit counts injected violations") {
  ExperimentConfig config = parse_config(base_config_json(2, 2, 200, "convex_tracking"));
  RunArtifacts artifacts = run_single(config, 13);
  SafetyAudit clean = safety_audit(artifacts.record, artifacts.scenario->truth);
  CHECK(clean.violations == 0);
  CHECK(clean.worst_slack >= -1e-9);

  RunRecord tampered = artifacts.record;
  tampered.actions[50].row(1) = Eigen::RowVector2d(50.0, 50.0);  // far outside
  SafetyAudit dirty = safety_audit(tampered, artifacts.scenario->truth);
  CHECK(dirty.violations == 1);
  CHECK(dirty.worst_slack < -1.0);
}

TEST_CASE("config parsing: missing fields are named, unknown keys rejected") {
  try {
    parse_config("{\"version\":1,\"topology\":{\"generator\":\"ring\"},\"seeds\":[1]}");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
    CHECK(std::string(e.what()).find("scenario") != std::string::npos);
  }

  try {
    parse_config(base_config_json(2, 2, 100, "convex_tracking") );
  } catch (...) {
    FAIL("valid config rejected");
  }

  CHECK(thrown_code([] {
    parse_config("{\"version\":1,\"bogus\":3,\"scenario\":{\"kind\":\"convex_tracking\","
                 "\"d\":2,\"m\":2,\"T\":100},\"topology\":{\"generator\":\"ring\"},"
                 "\"seeds\":[1]}");
  }) == ErrorCode::ConfigInvalid);

  CHECK(thrown_code([] { load_config("/nonexistent/path.json"); }) ==
        ErrorCode::ConfigInvalid);
}

TEST_CASE("unsafe gamma requests are rejected at run time") {
  ExperimentConfig config = parse_config(base_config_json(2, 2, 200, "convex_tracking"));
  config.estimation.gamma = 0.95;  // far above Delta^s / (L L_A) for the box
  CHECK(thrown_code([&] { run_single(config, 3); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("identical config and seed give byte-identical artifacts across threads") {
  ExperimentConfig config =
      parse_config(base_config_json(8, 2, 400, "convex_tracking"));
  config.threads = 1;
  RunArtifacts one = run_single(config, 21);
  config.threads = 8;
  RunArtifacts eight = run_single(config, 21);

  CHECK(run_csv(one) == run_csv(eight));
  CHECK(trace_csv(one) == trace_csv(eight));
  CHECK(estimation_csv(one) == estimation_csv(eight));
  CHECK(summary_json(one, config) == summary_json(eight, config));
}

TEST_CASE("run_experiment writes reproducible artifact directories") {
  ExperimentConfig config = parse_config(base_config_json(3, 2, 250, "convex_tracking"));
  auto dir_a = temp_dir("repro_a");
  auto dir_b = temp_dir("repro_b");

  config.output_dir = dir_a.string();
  run_experiment(config);
  config.output_dir = dir_b.string();
  run_experiment(config);

  for (const char* name :
       {"run.csv", "trace.csv", "estimation.csv", "topology.csv", "summary.json",
        "manifest.json", "config.json"}) {
    std::ifstream a(dir_a / "seed_7" / name, std::ios::binary);
    std::ifstream b(dir_b / "seed_7" / name, std::ios::binary);
    REQUIRE(a.good());
    REQUIRE(b.good());
    std::string content_a((std::istreambuf_iterator<char>(a)),
                          std::istreambuf_iterator<char>());
    std::string content_b((std::istreambuf_iterator<char>(b)),
                          std::istreambuf_iterator<char>());
    CHECK(content_a == content_b);
    CHECK(!content_a.empty());
  }
}

TEST_CASE("audit of a written run confirms the summary") {
  ExperimentConfig config = parse_config(base_config_json(2, 2, 300, "convex_tracking"));
  auto dir = temp_dir("audit");
  config.output_dir = dir.string();
  run_experiment(config);

  AuditOutcome outcome = audit_run_directory((dir / "seed_7").string());
  CHECK(outcome.audit.violations == 0);
  CHECK(outcome.summary_consistent);
  CHECK(outcome.detail.empty());
}

TEST_CASE("fit_log_log recovers a known exponent") {
  std::vector<double> x{2000, 4000, 8000, 16000, 32000};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.7));
  LogLogFit fit = fit_log_log(x, y);
  CHECK(fit.slope == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.ci_halfwidth <= 1e-9);
}

TEST_CASE("scaling_study validates its inputs") {
  ExperimentConfig config = parse_config(base_config_json(2, 2, 200, "convex_tracking"));
  CHECK(thrown_code([&] { scaling_study(config, {100, 200, 300}, 2); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(thrown_code([&] { scaling_study(config, {100, 200, 200, 400}, 2); }) ==
        ErrorCode::ConfigInvalid);
}

#ifdef DSAFE_CLI_PATH
TEST_CASE("CLI exit codes: success, config error, and audit") {
  auto dir = temp_dir("cli");
  const std::string cli = DSAFE_CLI_PATH;
  std::ofstream(dir / "good.json") << base_config_json(2, 2, 250, "convex_tracking");
  std::ofstream(dir / "bad.json") << "{\"version\":1}";

  const std::string out = (dir / "out").string();
  int run_ok = std::system(
      (cli + " run --config " + (dir / "good.json").string() + " --out " + out +
       " > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(run_ok) == 0);

  int run_bad = std::system(
      (cli + " run --config " + (dir / "bad.json").string() + " > /dev/null 2>&1")
          .c_str());
  CHECK(WEXITSTATUS(run_bad) == 2);

  int audit_ok = std::system(
      (cli + " audit --run " + out + "/seed_7 > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(audit_ok) == 0);
}
#endif
