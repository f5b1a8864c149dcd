#include "dsafe/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dsafe {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw Error(ErrorCode::ConfigInvalid, message);
}

void expect_keys(const json& obj, const std::string& where,
                 const std::set<std::string>& allowed) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      fail("unknown field '" + item.key() + "' in " + where);
}

template <typename T>
T require(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) fail("missing required field '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail("field '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T optional_field(const json& obj, const std::string& where, const std::string& key,
                 T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail("field '" + key + "' in " + where + " has the wrong type");
  }
}

DriftSpec parse_drift(const json& obj) {
  expect_keys(obj, "scenario.drift", {"type", "step", "switch_count"});
  DriftSpec drift;
  const std::string type = optional_field<std::string>(obj, "drift", "type", "none");
  if (type == "none")
    drift.kind = DriftKind::None;
  else if (type == "random_walk")
    drift.kind = DriftKind::RandomWalk;
  else if (type == "switching")
    drift.kind = DriftKind::Switching;
  else
    fail("drift.type must be none | random_walk | switching");
  drift.step = optional_field<double>(obj, "drift", "step", 0.0);
  drift.switch_count = optional_field<int>(obj, "drift", "switch_count", 0);
  if (drift.kind == DriftKind::RandomWalk && drift.step <= 0.0)
    fail("random_walk drift needs step > 0");
  if (drift.kind == DriftKind::Switching && drift.switch_count <= 0)
    fail("switching drift needs switch_count > 0");
  return drift;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("not valid JSON: ") + e.what());
  }
  expect_keys(root, "config",
              {"version", "scenario", "topology", "schedule", "estimation", "seeds",
               "output_dir", "threads", "trace_projections", "shadow_omd"});

  ExperimentConfig config;
  config.version = require<int>(root, "config", "version");
  if (config.version != 1) fail("unsupported config version");

  const json scenario = require<json>(root, "config", "scenario");
  expect_keys(scenario, "scenario",
              {"kind", "d", "m", "extra_rows", "T", "box_halfwidth", "box_lo", "box_hi",
               "drift"});
  config.scenario.kind = require<std::string>(scenario, "scenario", "kind");
  if (config.scenario.kind != "convex_tracking" && config.scenario.kind != "nonconvex_box")
    fail("scenario.kind must be convex_tracking | nonconvex_box");
  config.scenario.d = require<int>(scenario, "scenario", "d");
  config.scenario.m = require<int>(scenario, "scenario", "m");
  config.scenario.horizon = require<int>(scenario, "scenario", "T");
  config.scenario.extra_rows =
      optional_field<int>(scenario, "scenario", "extra_rows", 2);
  config.scenario.box_halfwidth =
      optional_field<double>(scenario, "scenario", "box_halfwidth", 1.0);
  config.scenario.box_lo = optional_field<double>(scenario, "scenario", "box_lo", 0.5);
  config.scenario.box_hi = optional_field<double>(scenario, "scenario", "box_hi", 1.8);
  if (scenario.contains("drift")) config.scenario.drift = parse_drift(scenario["drift"]);
  if (config.scenario.d < 1 || config.scenario.m < 1 || config.scenario.horizon < 1)
    fail("scenario dimensions must be positive");

  const json topology = require<json>(root, "config", "topology");
  expect_keys(topology, "topology", {"generator", "m", "matrix"});
  if (topology.contains("matrix")) {
    const auto rows = require<std::vector<std::vector<double>>>(topology, "topology",
                                                                "matrix");
    const int m = static_cast<int>(rows.size());
    Eigen::MatrixXd P(m, m);
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[i].size()) != m) fail("topology.matrix must be square");
      for (int j = 0; j < m; ++j) P(i, j) = rows[i][j];
    }
    config.topology.matrix = P;
  } else {
    config.topology.family = require<std::string>(topology, "topology", "generator");
    const int m = optional_field<int>(topology, "topology", "m", config.scenario.m);
    if (m != config.scenario.m) fail("topology.m disagrees with scenario.m");
  }
  if (config.topology.matrix &&
      config.topology.matrix->rows() != config.scenario.m)
    fail("topology.matrix size disagrees with scenario.m");

  if (root.contains("schedule")) {
    const json schedule = root["schedule"];
    expect_keys(schedule, "schedule",
                {"eta_scale", "t0_scale", "eta", "T0", "T1", "max_t1"});
    config.schedule.eta_scale =
        optional_field<double>(schedule, "schedule", "eta_scale", 1.0);
    config.schedule.t0_scale =
        optional_field<double>(schedule, "schedule", "t0_scale", 1.0);
    config.schedule.eta_override = optional_field<double>(schedule, "schedule", "eta", 0.0);
    config.schedule.t0_override = optional_field<int>(schedule, "schedule", "T0", 0);
    config.schedule.t1_override = optional_field<int>(schedule, "schedule", "T1", 0);
    config.schedule.max_t1 = optional_field<int>(schedule, "schedule", "max_t1", 2000);
  }

  if (root.contains("estimation")) {
    const json estimation = root["estimation"];
    expect_keys(estimation, "estimation",
                {"lambda", "delta", "rho", "R", "gamma", "sigma_zeta", "t0_factor",
                 "projection_mode", "noise"});
    config.estimation.lambda =
        optional_field<double>(estimation, "estimation", "lambda", 1.0);
    config.estimation.delta =
        optional_field<double>(estimation, "estimation", "delta", 0.05);
    config.estimation.rho = optional_field<double>(estimation, "estimation", "rho", 1.0);
    config.estimation.R = optional_field<double>(estimation, "estimation", "R", 0.1);
    config.estimation.gamma =
        optional_field<double>(estimation, "estimation", "gamma", 0.0);
    config.estimation.sigma_zeta =
        optional_field<double>(estimation, "estimation", "sigma_zeta", 0.0);
    config.estimation.t0_factor =
        optional_field<double>(estimation, "estimation", "t0_factor", 8.0);
    const std::string mode =
        optional_field<std::string>(estimation, "estimation", "projection_mode",
                                    "exact_cone");
    if (mode == "exact_cone")
      config.estimation.projection_mode = RobustMode::ExactCone;
    else if (mode == "conservative")
      config.estimation.projection_mode = RobustMode::ConservativePolytope;
    else
      fail("estimation.projection_mode must be exact_cone | conservative");
    const std::string noise =
        optional_field<std::string>(estimation, "estimation", "noise", "gaussian");
    if (noise == "gaussian")
      config.estimation.noise = NoiseKind::Gaussian;
    else if (noise == "uniform")
      config.estimation.noise = NoiseKind::Uniform;
    else
      fail("estimation.noise must be gaussian | uniform");
    if (config.estimation.lambda <= 0.0) fail("estimation.lambda must be > 0");
    if (config.estimation.delta <= 0.0 || config.estimation.delta >= 1.0)
      fail("estimation.delta must lie in (0, 1)");
    if (config.estimation.rho <= 0.0) fail("estimation.rho must be > 0");
    if (config.estimation.R < 0.0) fail("estimation.R must be >= 0");
  }

  config.seeds = require<std::vector<std::uint64_t>>(root, "config", "seeds");
  if (config.seeds.empty()) fail("seeds must not be empty");
  config.output_dir = optional_field<std::string>(root, "config", "output_dir", "");
  config.threads = optional_field<int>(root, "config", "threads", 1);
  if (config.threads < 1) fail("threads must be >= 1");
  config.trace_projections =
      optional_field<bool>(root, "config", "trace_projections", false);
  config.shadow_omd = optional_field<bool>(root, "config", "shadow_omd", false);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string canonical_json(const ExperimentConfig& config) {
  json root;
  root["version"] = config.version;
  json scenario;
  scenario["kind"] = config.scenario.kind;
  scenario["d"] = config.scenario.d;
  scenario["m"] = config.scenario.m;
  scenario["T"] = config.scenario.horizon;
  scenario["extra_rows"] = config.scenario.extra_rows;
  scenario["box_halfwidth"] = config.scenario.box_halfwidth;
  scenario["box_lo"] = config.scenario.box_lo;
  scenario["box_hi"] = config.scenario.box_hi;
  json drift;
  drift["type"] = config.scenario.drift.kind == DriftKind::None ? "none"
                  : config.scenario.drift.kind == DriftKind::RandomWalk
                      ? "random_walk"
                      : "switching";
  drift["step"] = config.scenario.drift.step;
  drift["switch_count"] = config.scenario.drift.switch_count;
  scenario["drift"] = drift;
  root["scenario"] = scenario;

  json topology;
  if (config.topology.matrix) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < config.topology.matrix->rows(); ++i) {
      rows.emplace_back();
      for (Eigen::Index j = 0; j < config.topology.matrix->cols(); ++j)
        rows.back().push_back((*config.topology.matrix)(i, j));
    }
    topology["matrix"] = rows;
  } else {
    topology["generator"] = config.topology.family;
    topology["m"] = config.scenario.m;
  }
  root["topology"] = topology;

  json schedule;
  schedule["eta_scale"] = config.schedule.eta_scale;
  schedule["t0_scale"] = config.schedule.t0_scale;
  schedule["eta"] = config.schedule.eta_override;
  schedule["T0"] = config.schedule.t0_override;
  schedule["T1"] = config.schedule.t1_override;
  schedule["max_t1"] = config.schedule.max_t1;
  root["schedule"] = schedule;

  json estimation;
  estimation["lambda"] = config.estimation.lambda;
  estimation["delta"] = config.estimation.delta;
  estimation["rho"] = config.estimation.rho;
  estimation["R"] = config.estimation.R;
  estimation["gamma"] = config.estimation.gamma;
  estimation["sigma_zeta"] = config.estimation.sigma_zeta;
  estimation["t0_factor"] = config.estimation.t0_factor;
  estimation["projection_mode"] =
      config.estimation.projection_mode == RobustMode::ExactCone ? "exact_cone"
                                                                 : "conservative";
  estimation["noise"] =
      config.estimation.noise == NoiseKind::Gaussian ? "gaussian" : "uniform";
  root["estimation"] = estimation;

  root["seeds"] = config.seeds;
  // output_dir, threads and trace_projections are execution knobs that do
  // not change results; they stay out of the fingerprint.
  root["shadow_omd"] = config.shadow_omd;
  return root.dump();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace dsafe
