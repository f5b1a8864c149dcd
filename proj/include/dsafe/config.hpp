#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsafe/estimation.hpp"
#include "dsafe/losses.hpp"

namespace dsafe {

struct TopologyConfig {
  std::string family = "complete";  // complete | ring | path | star
  std::optional<Eigen::MatrixXd> matrix;  // explicit row-major override
};

struct ScenarioConfig {
  std::string kind = "convex_tracking";  // convex_tracking | nonconvex_box
  int d = 2;
  int m = 4;
  int extra_rows = 2;  // convex scenarios only
  int horizon = 2000;
  double box_halfwidth = 1.0;  // convex
  double box_lo = 0.5, box_hi = 1.8;  // nonconvex
  DriftSpec drift;
};

struct ScheduleConfig {
  double eta_scale = 1.0;
  double t0_scale = 1.0;
  double eta_override = 0.0;  // > 0 pins eta
  int t0_override = 0;        // > 0 pins T0
  int t1_override = 0;        // > 0 pins T1, otherwise calibrated
  int max_t1 = 2000;
};

struct EstimationSettings {
  double lambda = 1.0;
  double delta = 0.05;
  double rho = 1.0;
  double R = 0.1;
  double gamma = 0.0;       // 0 -> safe maximum
  double sigma_zeta = 0.0;  // 0 -> L / sqrt(d)
  double t0_factor = 8.0;   // concentration constant for sizing diagnostics
  RobustMode projection_mode = RobustMode::ExactCone;
  NoiseKind noise = NoiseKind::Gaussian;
};

struct ExperimentConfig {
  int version = 1;
  ScenarioConfig scenario;
  TopologyConfig topology;
  ScheduleConfig schedule;
  EstimationSettings estimation;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;
  int threads = 1;
  bool trace_projections = false;
  bool shadow_omd = false;
};

/// Parses and cross-validates a config file. Unknown keys are rejected and
/// missing required fields are named in the error message.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

/// Canonical single-line JSON used for hashing and the run manifest.
std::string canonical_json(const ExperimentConfig& config);

/// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace dsafe
