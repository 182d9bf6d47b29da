#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bucketwatch/calibrator.hpp"
#include "bucketwatch/detector.hpp"
#include "bucketwatch/workload.hpp"

namespace bucketwatch {

struct ProfilingConfig {
  double split = 37.0 / 59.0;
  std::uint64_t seed = 1;
  std::set<std::string> include;
  std::set<std::string> exclude;
  std::size_t min_samples = 100;
};

struct SimulationConfig {
  std::optional<WorkloadSpec> workload;
  std::vector<FaultSpec> faults;
  std::size_t n_runs = 21;         // per fault model
  std::size_t golden_runs = 59;
  std::uint64_t seed = 7;
};

struct EvaluationConfig {
  double c = 3.0;
  std::optional<double> delta;  // empty: measured from the alerts
};

// Tool configuration. Every section and field is optional in the JSON file.
//   {"detector": {"B", "D", "direction", "depth_by_transaction": {tx: D}},
//    "calibration": {"alpha", "F", "w", "model", "d_range": [lo, hi], "absorption_source"},
//    "profiling": {"split", "seed", "include": [...], "exclude": [...], "min_samples"},
//    "simulation": {"workload": {...}, "faults": [{"pattern", "phase", "degradation",
//                   "start_offset"}], "n_runs", "golden_runs", "seed"},
//    "evaluation": {"c", "delta": number | "measured"}}
struct Config {
  MonitorConfig monitor;
  CalibrationQuery calibration;
  ProfilingConfig profiling;
  SimulationConfig simulation;
  EvaluationConfig evaluation;

  // Cross-section consistency: fault phases exist in the workload, per
  // transaction depths name monitored transactions.
  void validate() const;
};

Config config_from_json(std::string_view text);
Config load_config(const std::filesystem::path& path);

// Six fault models over phases "4" and "6" with the H, L, Ls patterns.
std::vector<FaultSpec> default_fault_campaign(double degradation = 0.6);

// Ten 720 s phases "1".."10" at 100 tps, sigma 10, for the given keys.
WorkloadSpec default_workload(std::vector<KeySpec> keys);

}  // namespace bucketwatch
