#include "bucketwatch/config.hpp"

#include <json.hpp>

#include "bucketwatch/error.hpp"
#include "bucketwatch/io.hpp"

namespace bucketwatch {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCategory::InvalidArgument, what); }

void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw Error(ErrorCategory::Parse, "config: " + std::string(section) + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto name : known) ok = ok || k == name;
    if (!ok) throw Error(ErrorCategory::Parse, "config: unknown field " + std::string(section) + "." + k);
  }
}

void read_detector(const json& j, MonitorConfig& m) {
  check_keys(j, "detector", {"B", "D", "direction", "depth_by_transaction", "skip_unprofiled"});
  m.detector.buckets = j.value("B", m.detector.buckets);
  m.detector.depth = j.value("D", m.detector.depth);
  if (j.contains("direction")) m.detector.direction = direction_from_string(j["direction"].get<std::string>());
  if (j.contains("depth_by_transaction"))
    m.depth_by_transaction = j["depth_by_transaction"].get<std::map<std::string, int>>();
  m.skip_unprofiled = j.value("skip_unprofiled", m.skip_unprofiled);
}

void read_calibration(const json& j, CalibrationQuery& q) {
  check_keys(j, "calibration", {"alpha", "F", "w", "model", "d_range", "absorption_source"});
  q.alpha = j.value("alpha", q.alpha);
  q.target_f = j.value("F", q.target_f);
  q.w = j.value("w", q.w);
  if (j.contains("model")) q.model = false_alarm_model_from_string(j["model"].get<std::string>());
  if (j.contains("d_range")) {
    const auto r = j["d_range"].get<std::vector<int>>();
    if (r.size() != 2) throw Error(ErrorCategory::Parse, "config: calibration.d_range must be [min, max]");
    q.range = {r[0], r[1]};
  }
  if (j.contains("absorption_source"))
    q.source = absorption_source_from_string(j["absorption_source"].get<std::string>());
}

void read_profiling(const json& j, ProfilingConfig& p) {
  check_keys(j, "profiling", {"split", "seed", "include", "exclude", "min_samples"});
  p.split = j.value("split", p.split);
  p.seed = j.value("seed", p.seed);
  if (j.contains("include")) p.include = j["include"].get<std::set<std::string>>();
  if (j.contains("exclude")) p.exclude = j["exclude"].get<std::set<std::string>>();
  p.min_samples = j.value("min_samples", p.min_samples);
}

void read_simulation(const json& j, SimulationConfig& s) {
  check_keys(j, "simulation", {"workload", "faults", "n_runs", "golden_runs", "seed"});
  if (j.contains("workload")) s.workload = workload_from_json(j["workload"].dump());
  if (j.contains("faults")) {
    s.faults.clear();
    for (const auto& f : j["faults"]) {
      check_keys(f, "simulation.faults[]", {"pattern", "phase", "degradation", "start_offset"});
      FaultSpec spec;
      spec.pattern = fault_pattern_from_string(f.at("pattern").get<std::string>());
      spec.phase_id = f.at("phase").get<std::string>();
      spec.degradation = f.value("degradation", spec.degradation);
      spec.start_offset = f.value("start_offset", spec.start_offset);
      s.faults.push_back(spec);
    }
  }
  s.n_runs = j.value("n_runs", s.n_runs);
  s.golden_runs = j.value("golden_runs", s.golden_runs);
  s.seed = j.value("seed", s.seed);
}

void read_evaluation(const json& j, EvaluationConfig& e) {
  check_keys(j, "evaluation", {"c", "delta"});
  e.c = j.value("c", e.c);
  if (j.contains("delta")) {
    const auto& d = j["delta"];
    if (d.is_string() && d.get<std::string>() == "measured")
      e.delta.reset();
    else if (d.is_number())
      e.delta = d.get<double>();
    else
      throw Error(ErrorCategory::Parse, "config: evaluation.delta must be a number or \"measured\"");
  }
}

}  // namespace

void Config::validate() const {
  monitor.validate();
  calibration.validate();
  if (!(profiling.split > 0.0 && profiling.split < 1.0)) invalid("profiling.split must be in (0, 1)");
  for (const auto& tx : profiling.include)
    if (profiling.exclude.contains(tx)) invalid("transaction " + tx + " is both included and excluded");
  for (const auto& [tx, d] : monitor.depth_by_transaction) {
    if (!profiling.include.empty() && !profiling.include.contains(tx))
      invalid("detector.depth_by_transaction names " + tx + ", which is not in profiling.include");
    if (profiling.exclude.contains(tx))
      invalid("detector.depth_by_transaction names excluded transaction " + tx);
  }
  if (!(evaluation.c >= 0.0)) invalid("evaluation.c must be >= 0");
  if (evaluation.delta && !(*evaluation.delta >= 0.0)) invalid("evaluation.delta must be >= 0");
  if (simulation.workload) {
    simulation.workload->validate();
    for (const auto& f : simulation.faults) {
      f.validate();
      const auto& ph = simulation.workload->phases[simulation.workload->phase_index(f.phase_id)];
      if (f.start_offset + f.span() > ph.duration)
        invalid("fault " + f.model_name() + " does not fit in phase " + ph.id);
    }
    if (!monitor.depth_by_transaction.empty())
      for (const auto& [tx, d] : monitor.depth_by_transaction) {
        bool found = false;
        for (const auto& k : simulation.workload->keys) found = found || k.transaction == tx;
        if (!found) invalid("detector.depth_by_transaction names " + tx + ", which the workload lacks");
      }
  } else {
    for (const auto& f : simulation.faults) f.validate();
  }
}

Config config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("config: ") + e.what());
  }
  check_keys(j, "config", {"detector", "calibration", "profiling", "simulation", "evaluation"});
  Config c;
  try {
    if (j.contains("detector")) read_detector(j["detector"], c.monitor);
    if (j.contains("calibration")) read_calibration(j["calibration"], c.calibration);
    if (j.contains("profiling")) read_profiling(j["profiling"], c.profiling);
    if (j.contains("simulation")) read_simulation(j["simulation"], c.simulation);
    if (j.contains("evaluation")) read_evaluation(j["evaluation"], c.evaluation);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("config: ") + e.what());
  }
  if (c.simulation.workload && c.simulation.faults.empty()) c.simulation.faults = default_fault_campaign();
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) { return config_from_json(read_file(path)); }

std::vector<FaultSpec> default_fault_campaign(double degradation) {
  std::vector<FaultSpec> out;
  for (const char* phase : {"4", "6"})
    for (auto pattern : {FaultPattern::H, FaultPattern::L, FaultPattern::Ls})
      out.push_back(FaultSpec{pattern, phase, degradation, 120.0});
  return out;
}

WorkloadSpec default_workload(std::vector<KeySpec> keys) {
  WorkloadSpec spec;
  spec.keys = std::move(keys);
  for (int i = 1; i <= 10; ++i) spec.phases.push_back({std::to_string(i), 720.0, 100.0, 10.0});
  return spec;
}

}  // namespace bucketwatch
