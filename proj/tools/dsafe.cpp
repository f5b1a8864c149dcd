#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dsafe/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitSafety = 4;

int classify(const dsafe::Error& e) {
  switch (e.code()) {
    case dsafe::ErrorCode::ConfigInvalid:
    case dsafe::ErrorCode::ScheduleInvalid:
    case dsafe::ErrorCode::NonpositiveInput:
      return kExitConfig;
    default:
      return kExitRuntime;
  }
}

std::vector<int> parse_horizons(const std::string& csv) {
  std::vector<int> horizons;
  std::stringstream stream(csv);
  std::string item;
  while (std::getline(stream, item, ',')) horizons.push_back(std::stoi(item));
  return horizons;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safe distributed online optimization experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode, run_dir, horizons_csv;
  std::uint64_t seed = 0;
  bool seed_set = false, trace_projections = false;
  int repeats = 5, threads = 0;

  CLI::App* run = app.add_subcommand("run", "run the configured experiment");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--seed", seed, "override the config seed list with one seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--out", out_dir, "artifact output directory");
  run->add_option("--mode", mode, "convex | nonconvex scenario override");
  run->add_option("--threads", threads, "per-run worker threads");
  run->add_flag("--trace-projections", trace_projections,
                "append projection iteration counts to the artifacts");

  CLI::App* study = app.add_subcommand("study", "regret scaling study");
  study->add_option("--config", config_path, "experiment config JSON")->required();
  study->add_option("--horizons", horizons_csv, "comma-separated horizons")->required();
  study->add_option("--repeats", repeats, "seeds per horizon");
  study->add_option("--out", out_dir, "study CSV output directory");
  study->add_option("--threads", threads, "parallel study jobs");

  CLI::App* audit = app.add_subcommand("audit", "re-audit a written run directory");
  audit->add_option("--run", run_dir, "run directory with run.csv + summary.json")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      dsafe::ExperimentConfig config = dsafe::load_config(config_path);
      if (seed_set) config.seeds = {seed};
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (threads > 0) config.threads = threads;
      if (trace_projections) config.trace_projections = true;
      if (mode == "convex")
        config.scenario.kind = "convex_tracking";
      else if (mode == "nonconvex")
        config.scenario.kind = "nonconvex_box";
      else if (!mode.empty())
        throw dsafe::Error(dsafe::ErrorCode::ConfigInvalid,
                           "--mode must be convex or nonconvex");

      long violations = 0;
      for (const auto& artifacts : dsafe::run_experiment(config)) {
        double mean_regret = 0.0;
        for (double r : artifacts.report.regret) mean_regret += r;
        mean_regret /= artifacts.report.m;
        std::printf(
            "seed %llu: T=%d T0=%d T1=%d eta=%.6g B_r=%.6g regret=%.6g C*=%.6g "
            "violations=%ld containment=%d\n",
            static_cast<unsigned long long>(artifacts.seed), artifacts.report.T,
            artifacts.schedule.T0, artifacts.schedule.T1, artifacts.schedule.eta,
            artifacts.report.radius, mean_regret, artifacts.report.path_length,
            artifacts.report.violation_count, artifacts.containment ? 1 : 0);
        violations += artifacts.report.violation_count;
      }
      if (violations > 0) {
        std::fprintf(stderr, "safety violations detected: %ld\n", violations);
        return kExitSafety;
      }
      return kExitOk;
    }

    if (study->parsed()) {
      dsafe::ExperimentConfig config = dsafe::load_config(config_path);
      if (threads > 0) config.threads = threads;
      dsafe::StudyResult result =
          dsafe::scaling_study(config, parse_horizons(horizons_csv), repeats);
      const std::string csv = dsafe::study_csv(result);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(std::filesystem::path(out_dir) / "study.csv",
                          std::ios::binary);
        out << csv;
      }
      std::cout << csv;
      std::printf("zero-drift slope %.4f +- %.4f, drift slope %.4f +- %.4f\n",
                  result.zero_drift_fit.slope, result.zero_drift_fit.ci_halfwidth,
                  result.drift_fit.slope, result.drift_fit.ci_halfwidth);
      return kExitOk;
    }

    dsafe::AuditOutcome outcome = dsafe::audit_run_directory(run_dir);
    std::printf("violations=%ld worst_slack=%.3e summary_consistent=%d\n",
                outcome.audit.violations, outcome.audit.worst_slack,
                outcome.summary_consistent ? 1 : 0);
    if (!outcome.detail.empty()) std::fprintf(stderr, "%s\n", outcome.detail.c_str());
    if (outcome.audit.violations > 0) return kExitSafety;
    if (!outcome.summary_consistent) return kExitRuntime;
    return kExitOk;
  } catch (const dsafe::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
