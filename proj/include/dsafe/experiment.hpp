#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsafe/config.hpp"
#include "dsafe/metrics.hpp"
#include "dsafe/optimizer.hpp"

namespace dsafe {

/// Everything produced by one seeded end-to-end run.
struct RunArtifacts {
  std::uint64_t seed = 0;
  std::shared_ptr<const Scenario> scenario;
  NetworkTopology topology;
  Schedule schedule;
  double alpha = 0.0;
  std::vector<SafeSetEstimate> estimates;
  ExtraDiagnostics extra_diagnostics;
  RunRecord record;
  MinimizerTrace trace;
  RegretReport report;
  bool containment = false;          // post-hoc: all row errors within B_r
  double worst_estimate_error = 0.0; // max_{i,k} || ahat_k^i - a_k ||
};

/// Full pipeline for one seed: scenario -> exploration -> decentralized
/// solve -> safe sets -> optimization -> metrics.
RunArtifacts run_single(const ExperimentConfig& config, std::uint64_t seed);

/// Runs every configured seed (writing per-seed artifact directories when
/// output_dir is set) and returns the artifacts in seed order.
std::vector<RunArtifacts> run_experiment(const ExperimentConfig& config);

// Deterministic serializers shared by the disk writer and the tests.
std::string run_csv(const RunArtifacts& artifacts);
std::string trace_csv(const RunArtifacts& artifacts);
std::string estimation_csv(const RunArtifacts& artifacts);
std::string topology_csv(const NetworkTopology& topology, int max_k = 30);
std::string summary_json(const RunArtifacts& artifacts, const ExperimentConfig& config);

/// Writes run.csv, trace.csv, estimation.csv, topology.csv, summary.json,
/// config.json and manifest.json under dir; returns the file names written.
std::vector<std::string> write_run_artifacts(const RunArtifacts& artifacts,
                                             const ExperimentConfig& config,
                                             const std::string& dir);

struct StudyRow {
  int horizon = 0;
  double mean_regret_zero = 0.0;   // averaged over agents and repeats
  double mean_regret_drift = 0.0;
  double mean_path_zero = 0.0;
  double mean_path_drift = 0.0;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  LogLogFit zero_drift_fit;
  LogLogFit drift_fit;
};

/// Runs the pipeline for every (horizon, repeat) pair in both the zero-drift
/// and the drifting variants of the base config, then fits the log-log
/// regret exponents. Jobs run in parallel, one thread each.
StudyResult scaling_study(const ExperimentConfig& base, const std::vector<int>& horizons,
                          int repeats);

std::string study_csv(const StudyResult& result);

/// Re-audits a written run directory against its recorded scenario: rebuilds
/// the truth from config + seed, recomputes violations from run.csv and
/// cross-checks the summary. Returns the audit plus whether the summary
/// matched.
struct AuditOutcome {
  SafetyAudit audit;
  bool summary_consistent = false;
  std::string detail;
};
AuditOutcome audit_run_directory(const std::string& dir);

}  // namespace dsafe
