#include "dsafe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsafe/csv.hpp"
#include "dsafe/parallel.hpp"

namespace dsafe {

namespace {

using nlohmann::json;

constexpr std::uint64_t kScenarioTag = 0x21;
constexpr std::uint64_t kExplorationTag = 0x22;
constexpr std::uint64_t kExtraTag = 0x23;

Scenario build_scenario(const ExperimentConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kScenarioTag));
  if (config.scenario.kind == "convex_tracking") {
    ConvexScenarioParams params;
    params.d = config.scenario.d;
    params.m = config.scenario.m;
    params.extra_rows = config.scenario.extra_rows;
    params.horizon = config.scenario.horizon;
    params.box_halfwidth = config.scenario.box_halfwidth;
    params.drift = config.scenario.drift;
    return make_convex_tracking(params, rng);
  }
  NonconvexScenarioParams params;
  params.d = config.scenario.d;
  params.m = config.scenario.m;
  params.horizon = config.scenario.horizon;
  params.box_lo = config.scenario.box_lo;
  params.box_hi = config.scenario.box_hi;
  params.drift = config.scenario.drift;
  return make_nonconvex_family(params, rng);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

RunArtifacts run_single(const ExperimentConfig& config, std::uint64_t seed) {
  RunArtifacts artifacts;
  artifacts.seed = seed;

  auto scenario = std::make_shared<Scenario>(build_scenario(config, seed));
  artifacts.scenario = scenario;
  const bool nonconvex = scenario->losses.kind == LossKind::NonconvexReparameterized;

  Eigen::MatrixXd P = config.topology.matrix
                          ? *config.topology.matrix
                          : make_mixing_matrix(config.topology.family, config.scenario.m);
  artifacts.topology = validate_topology(P);
  const NetworkTopology& topology = artifacts.topology;

  const int T = config.scenario.horizon;
  const double rho = config.estimation.rho;
  Schedule schedule = make_schedule(
      T, scenario->losses.kind, /*T1=*/2,
      nonconvex ? topology.diameter : 0, config.schedule.eta_scale,
      config.schedule.t0_scale, config.schedule.eta_override,
      config.schedule.t0_override);

  ExplorationConfig explore_cfg = make_exploration_config(
      *scenario, schedule.T0, config.estimation.gamma, config.estimation.sigma_zeta);
  ExplorationLog logs =
      run_exploration(scenario->truth, explore_cfg, config.scenario.m,
                      config.estimation.R, derive_seed(seed, kExplorationTag),
                      config.estimation.noise, config.threads);

  artifacts.alpha = default_extra_step(logs, config.estimation.lambda);
  const std::uint64_t extra_seed = derive_seed(seed, kExtraTag);
  const double consensus_target = std::pow(static_cast<double>(T), -rho);
  schedule.T1 = config.schedule.t1_override > 0
                    ? config.schedule.t1_override
                    : calibrate_t1(logs, topology, artifacts.alpha,
                                   config.estimation.lambda, consensus_target,
                                   config.schedule.max_t1, extra_seed);
  if (schedule.optimization_start() >= T)
    throw Error(ErrorCode::ScheduleInvalid,
                "estimation phases T0=" + std::to_string(schedule.T0) +
                    " T1=" + std::to_string(schedule.T1) + " exhaust the horizon");

  artifacts.extra_diagnostics.reference = centralized_ridge(logs, config.estimation.lambda);
  std::vector<Eigen::MatrixXd> iterates =
      extra_solve(logs, topology, artifacts.alpha, schedule.T1,
                  config.estimation.lambda, extra_seed, &artifacts.extra_diagnostics);

  ConfidenceParams radius_params;
  radius_params.horizon = static_cast<double>(T);
  radius_params.rho = rho;
  radius_params.R = config.estimation.R;
  radius_params.d = config.scenario.d;
  radius_params.m = config.scenario.m;
  radius_params.T0 = schedule.T0;
  radius_params.L = scenario->L;
  radius_params.lambda = config.estimation.lambda;
  radius_params.delta = config.estimation.delta;
  radius_params.n = static_cast<int>(scenario->truth.num_constraints());
  radius_params.gamma = explore_cfg.gamma;
  radius_params.sigma_zeta = explore_cfg.sigma_zeta;
  radius_params.L_A = scenario->L_A;
  const double radius = confidence_radius(radius_params);

  artifacts.estimates.reserve(iterates.size());
  for (int i = 0; i < static_cast<int>(iterates.size()); ++i) {
    SafeSetEstimate estimate;
    estimate.A_hat = iterates[i];
    estimate.radius = radius;
    estimate.agent = i;
    estimate.T0 = schedule.T0;
    estimate.T1 = schedule.T1;
    estimate.lambda = config.estimation.lambda;
    estimate.delta = config.estimation.delta;
    estimate.rho = rho;
    estimate.R = config.estimation.R;
    artifacts.estimates.push_back(std::move(estimate));
  }

  artifacts.worst_estimate_error = 0.0;
  for (const auto& estimate : artifacts.estimates)
    for (Eigen::Index k = 0; k < scenario->truth.num_constraints(); ++k)
      artifacts.worst_estimate_error =
          std::max(artifacts.worst_estimate_error,
                   (estimate.A_hat.row(k) - scenario->truth.A.row(k)).norm());
  artifacts.containment = artifacts.worst_estimate_error <= radius;

  RunOptions options;
  options.projection_mode = config.estimation.projection_mode;
  options.threads = config.threads;
  options.shadow_omd = config.shadow_omd && nonconvex;
  ProjectionLog projection_log;
  if (config.trace_projections) options.projection_log = &projection_log;

  artifacts.schedule = schedule;
  artifacts.record = nonconvex
                         ? run_d_safe_ogd_nonconvex(scenario, topology, schedule,
                                                    artifacts.estimates, logs, options)
                         : run_d_safe_ogd_convex(scenario, topology, schedule,
                                                 artifacts.estimates, logs, options);

  artifacts.trace = compute_minimizer_trace(scenario->losses, scenario->truth);
  const double tau_in = 2.0 * radius * scenario->L;
  try {
    attach_shrunk_comparators(artifacts.trace, scenario->truth, tau_in);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyShrunkSet) throw;
    // decomposition reported without the shrunk comparator
  }
  artifacts.report = compute_regret(artifacts.record, artifacts.trace);
  return artifacts;
}

std::vector<RunArtifacts> run_experiment(const ExperimentConfig& config) {
  std::vector<RunArtifacts> all;
  all.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) {
    RunArtifacts artifacts = run_single(config, seed);
    if (!config.output_dir.empty()) {
      std::filesystem::path dir =
          std::filesystem::path(config.output_dir) / ("seed_" + std::to_string(seed));
      write_run_artifacts(artifacts, config, dir.string());
    }
    all.push_back(std::move(artifacts));
  }
  return all;
}

std::string run_csv(const RunArtifacts& artifacts) {
  const RunRecord& record = artifacts.record;
  const Eigen::Index d = record.scenario->losses.d;
  std::string out = "t,agent,phase";
  for (Eigen::Index j = 0; j < d; ++j) out += ",x" + std::to_string(j);
  out += ",local_loss,global_loss,feasible_true,disagreement,deviation_omd\n";
  for (int t = 0; t < record.T; ++t)
    for (int i = 0; i < record.m; ++i) {
      append_number(out, t + 1);
      out += ',';
      append_number(out, i);
      out += ',';
      out += phase_name(record.phase[t]);
      for (Eigen::Index j = 0; j < d; ++j) {
        out += ',';
        append_number(out, record.actions[t](i, j));
      }
      out += ',';
      append_number(out, record.local_loss(t, i));
      out += ',';
      append_number(out, record.global_loss(t, i));
      out += ',';
      out += record.slack(t, i) >= -1e-9 ? '1' : '0';
      out += ',';
      append_number(out, record.disagreement[t]);
      out += ',';
      append_number(out, record.deviation[t]);
      out += '\n';
    }
  return out;
}

std::string trace_csv(const RunArtifacts& artifacts) {
  const MinimizerTrace& trace = artifacts.trace;
  const LossSequence& losses = artifacts.scenario->losses;
  const Eigen::Index d = losses.d;
  const bool shrunk = !trace.x_tilde.empty();
  std::string out = "t";
  for (Eigen::Index j = 0; j < d; ++j) out += ",xstar" + std::to_string(j);
  out += ",cum_path,f_star";
  if (shrunk) {
    for (Eigen::Index j = 0; j < d; ++j) out += ",xtilde" + std::to_string(j);
    out += ",f_tilde";
  }
  out += '\n';
  double cum = 0.0;
  for (int t = 0; t < trace.horizon(); ++t) {
    if (t > 0) cum += (trace.x_star[t] - trace.x_star[t - 1]).norm();
    append_number(out, t + 1);
    for (Eigen::Index j = 0; j < d; ++j) {
      out += ',';
      append_number(out, trace.x_star[t][j]);
    }
    out += ',';
    append_number(out, cum);
    out += ',';
    append_number(out, losses.global_value(t, trace.x_star[t]));
    if (shrunk) {
      for (Eigen::Index j = 0; j < d; ++j) {
        out += ',';
        append_number(out, trace.x_tilde[t][j]);
      }
      out += ',';
      append_number(out, losses.global_value(t, trace.x_tilde[t]));
    }
    out += '\n';
  }
  return out;
}

std::string estimation_csv(const RunArtifacts& artifacts) {
  std::string out = "iteration,agent,frob_error_to_oracle,pairwise_disagreement\n";
  for (const auto& row : artifacts.extra_diagnostics.rows) {
    append_number(out, row.iteration);
    out += ',';
    append_number(out, row.agent);
    out += ',';
    append_number(out, row.error_to_reference);
    out += ',';
    append_number(out, row.max_pairwise);
    out += '\n';
  }
  return out;
}

std::string topology_csv(const NetworkTopology& topology, int max_k) {
  std::string out = "k,agent,deviation,bound\n";
  const double root_m = std::sqrt(static_cast<double>(topology.m));
  for (int k = 1; k <= max_k; ++k)
    for (int i = 0; i < topology.m; ++i) {
      append_number(out, k);
      out += ',';
      append_number(out, i);
      out += ',';
      append_number(out, mixing_error(topology, k, i));
      out += ',';
      append_number(out, root_m * std::pow(topology.beta, k));
      out += '\n';
    }
  return out;
}

std::string summary_json(const RunArtifacts& artifacts, const ExperimentConfig& config) {
  const RegretReport& report = artifacts.report;
  json summary;
  summary["schema"] = 1;
  summary["seed"] = artifacts.seed;
  summary["config_hash"] = fnv1a_hex(canonical_json(config));
  summary["mode"] = artifacts.record.common_set ? "nonconvex" : "convex";
  summary["T"] = report.T;
  summary["m"] = report.m;
  summary["d"] = static_cast<int>(artifacts.scenario->losses.d);
  summary["n"] = static_cast<int>(artifacts.scenario->truth.num_constraints());
  summary["beta"] = artifacts.topology.beta;
  summary["diameter"] = artifacts.topology.diameter;
  summary["T0"] = artifacts.schedule.T0;
  summary["T1"] = artifacts.schedule.T1;
  summary["consensus_rounds"] = artifacts.schedule.consensus_rounds;
  summary["eta"] = artifacts.schedule.eta;
  summary["alpha"] = artifacts.alpha;
  summary["radius"] = report.radius;
  summary["tau_in"] = report.tau_in;
  summary["L"] = artifacts.scenario->L;
  summary["G"] = artifacts.scenario->losses.G;
  summary["path_length"] = report.path_length;
  summary["regret"] = report.regret;
  summary["term_exploration"] = report.term_exploration;
  summary["term_tracking"] = report.term_tracking;
  summary["term_comparator"] = report.term_comparator;
  summary["decomposition_available"] = report.decomposition_available;
  summary["decomposition_gap"] = report.decomposition_gap;
  summary["violation_count"] = report.violation_count;
  summary["worst_slack"] = report.worst_slack;
  summary["max_disagreement"] = report.max_disagreement;
  summary["max_deviation"] = report.max_deviation;
  summary["disagreement_kappa"] = report.disagreement_kappa;
  summary["containment"] = artifacts.containment;
  summary["worst_estimate_error"] = artifacts.worst_estimate_error;
  return summary.dump(2) + "\n";
}

std::vector<std::string> write_run_artifacts(const RunArtifacts& artifacts,
                                             const ExperimentConfig& config,
                                             const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string config_text = canonical_json(config) + "\n";
  const std::vector<std::pair<std::string, std::string>> files = {
      {"run.csv", run_csv(artifacts)},
      {"trace.csv", trace_csv(artifacts)},
      {"estimation.csv", estimation_csv(artifacts)},
      {"topology.csv", topology_csv(artifacts.topology)},
      {"summary.json", summary_json(artifacts, config)},
      {"config.json", config_text},
  };

  json manifest;
  manifest["schema"] = 1;
  manifest["seed"] = artifacts.seed;
  manifest["config_hash"] = fnv1a_hex(config_text);
  json fingerprints;
  std::vector<std::string> written;
  for (const auto& [name, content] : files) {
    write_file(fs::path(dir) / name, content);
    fingerprints[name] = fnv1a_hex(content);
    written.push_back(name);
  }
  manifest["files"] = fingerprints;
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
  written.push_back("manifest.json");
  return written;
}

StudyResult scaling_study(const ExperimentConfig& base, const std::vector<int>& horizons,
                          int repeats) {
  if (horizons.size() < 4)
    throw Error(ErrorCode::ConfigInvalid, "study needs at least 4 horizons");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (horizons[i] <= horizons[i - 1])
      throw Error(ErrorCode::ConfigInvalid, "horizons must be strictly increasing");
  if (repeats < 1) throw Error(ErrorCode::ConfigInvalid, "repeats must be >= 1");

  ExperimentConfig zero = base;
  zero.output_dir.clear();
  zero.threads = 1;
  zero.scenario.drift = DriftSpec{};

  ExperimentConfig drift = base;
  drift.output_dir.clear();
  drift.threads = 1;
  if (drift.scenario.drift.kind == DriftKind::None) {
    drift.scenario.drift.kind = DriftKind::RandomWalk;
    drift.scenario.drift.step = 0.01;
  }

  struct JobResult {
    double regret = 0.0;
    double path = 0.0;
  };
  const int h = static_cast<int>(horizons.size());
  std::vector<JobResult> results(static_cast<std::size_t>(h) * repeats * 2);

  const std::uint64_t seed_base = base.seeds.front();
  parallel_for_index(h * repeats * 2, base.threads, [&](int job) {
    const int variant = job % 2;
    const int repeat = (job / 2) % repeats;
    const int hi = job / (2 * repeats);
    ExperimentConfig config = variant == 0 ? zero : drift;
    config.scenario.horizon = horizons[hi];
    RunArtifacts artifacts = run_single(config, seed_base + repeat);
    double mean_regret = 0.0;
    for (double r : artifacts.report.regret) mean_regret += r;
    mean_regret /= artifacts.report.m;
    results[job] = {mean_regret, artifacts.report.path_length};
  });

  StudyResult study;
  std::vector<double> ts, zero_means, drift_means;
  for (int hi = 0; hi < h; ++hi) {
    StudyRow row;
    row.horizon = horizons[hi];
    for (int r = 0; r < repeats; ++r) {
      const JobResult& z = results[hi * 2 * repeats + r * 2 + 0];
      const JobResult& v = results[hi * 2 * repeats + r * 2 + 1];
      row.mean_regret_zero += z.regret / repeats;
      row.mean_path_zero += z.path / repeats;
      row.mean_regret_drift += v.regret / repeats;
      row.mean_path_drift += v.path / repeats;
    }
    study.rows.push_back(row);
    ts.push_back(row.horizon);
    zero_means.push_back(std::max(row.mean_regret_zero, 1e-12));
    drift_means.push_back(std::max(row.mean_regret_drift, 1e-12));
  }
  study.zero_drift_fit = fit_log_log(ts, zero_means);
  study.drift_fit = fit_log_log(ts, drift_means);
  return study;
}

std::string study_csv(const StudyResult& result) {
  std::string out =
      "T,mean_regret_zero,mean_path_zero,mean_regret_drift,mean_path_drift\n";
  for (const auto& row : result.rows) {
    append_number(out, row.horizon);
    out += ',';
    append_number(out, row.mean_regret_zero);
    out += ',';
    append_number(out, row.mean_path_zero);
    out += ',';
    append_number(out, row.mean_regret_drift);
    out += ',';
    append_number(out, row.mean_path_drift);
    out += '\n';
  }
  out += "# zero_drift_slope,";
  append_number(out, result.zero_drift_fit.slope);
  out += ",ci,";
  append_number(out, result.zero_drift_fit.ci_halfwidth);
  out += "\n# drift_slope,";
  append_number(out, result.drift_fit.slope);
  out += ",ci,";
  append_number(out, result.drift_fit.ci_halfwidth);
  out += '\n';
  return out;
}

AuditOutcome audit_run_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  AuditOutcome outcome;

  ExperimentConfig config = parse_config(read_file(fs::path(dir) / "config.json"));
  json summary = json::parse(read_file(fs::path(dir) / "summary.json"));
  const std::uint64_t seed = summary.at("seed").get<std::uint64_t>();
  Scenario scenario = build_scenario(config, seed);

  // Re-read actions and per-round global losses from run.csv.
  std::istringstream run_stream(read_file(fs::path(dir) / "run.csv"));
  std::string line;
  if (!std::getline(run_stream, line))
    throw Error(ErrorCode::IoError, "run.csv is empty");
  const Eigen::Index d = scenario.losses.d;
  const int T = summary.at("T").get<int>();
  const int m = summary.at("m").get<int>();

  std::vector<Eigen::MatrixXd> actions(T, Eigen::MatrixXd::Zero(m, d));
  Eigen::MatrixXd global_loss(T, m);
  while (std::getline(run_stream, line)) {
    std::istringstream fields(line);
    std::string field;
    std::vector<std::string> row;
    while (std::getline(fields, field, ',')) row.push_back(field);
    const int t = std::stoi(row[0]) - 1;
    const int agent = std::stoi(row[1]);
    for (Eigen::Index j = 0; j < d; ++j) actions[t](agent, j) = std::stod(row[3 + j]);
    global_loss(t, agent) = std::stod(row[3 + d + 1]);
  }

  // Comparator losses from trace.csv.
  std::istringstream trace_stream(read_file(fs::path(dir) / "trace.csv"));
  std::getline(trace_stream, line);
  std::vector<double> f_star(T, 0.0);
  while (std::getline(trace_stream, line)) {
    std::istringstream fields(line);
    std::string field;
    std::vector<std::string> row;
    while (std::getline(fields, field, ',')) row.push_back(field);
    f_star[std::stoi(row[0]) - 1] = std::stod(row[2 + d]);
  }

  outcome.audit.worst_slack = std::numeric_limits<double>::infinity();
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < m; ++i) {
      const double slack =
          (scenario.truth.b - scenario.truth.A * actions[t].row(i).transpose())
              .minCoeff();
      outcome.audit.worst_slack = std::min(outcome.audit.worst_slack, slack);
      if (slack < -1e-9) ++outcome.audit.violations;
    }

  std::vector<double> regret(m, 0.0);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < m; ++i) regret[i] += global_loss(t, i) - f_star[t];

  outcome.summary_consistent = true;
  std::ostringstream detail;
  if (summary.at("violation_count").get<long>() != outcome.audit.violations) {
    outcome.summary_consistent = false;
    detail << "violation_count mismatch: recomputed " << outcome.audit.violations
           << " vs summary " << summary.at("violation_count").get<long>() << "; ";
  }
  const auto recorded_regret = summary.at("regret").get<std::vector<double>>();
  for (int i = 0; i < m; ++i)
    if (std::abs(recorded_regret[i] - regret[i]) > 1e-8) {
      outcome.summary_consistent = false;
      detail << "regret mismatch for agent " << i << ": recomputed " << regret[i]
             << " vs summary " << recorded_regret[i] << "; ";
      break;
    }
  outcome.detail = detail.str();
  return outcome;
}

}  // namespace dsafe
