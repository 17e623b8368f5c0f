#pragma once

#include "mfg/fbsde.hpp"
#include "mfg/meanfield.hpp"
#include "mfg/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mfg::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitNoConvergence = 2,
  kExitCheckFailed = 3,
  kExitConfig = 4,
};

struct CheckSettings {
  int samples = 200;
  int cloud_size = 32;
  double lambda_m = 0.0;
  std::string scheme = "mixed";
  double state_scale = 1.0;
};

struct ExperimentConfig {
  std::string model;
  ParamMap params;
  TimeGrid grid{0.0, 1.0, 20};
  int particles = 1000;
  std::uint64_t seed = 0;
  std::vector<double> initial_mean{0.0};
  std::vector<double> initial_std{1.0};
  SolverParams solver;
  CheckSettings check;
  nlohmann::json thresholds = nlohmann::json::object();
  std::string output_dir = ".";
};

// Applies dotted-path overrides such as "solver.damping=0.3" or
// "params.Q=2". The value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Throws ConfigError on unknown keys, wrong types or invariant violations
// (unknown model, particles < 16, steps < 2).
ExperimentConfig parse_config(const nlohmann::json& config);

// Full command line, argv[0] included. Returns the process exit code; errors
// are also printed to stderr as one JSON line.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace mfg::cli
