// bucketwatch: profile -> calibrate -> simulate -> detect -> evaluate.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bucketwatch/calibrator.hpp"
#include "bucketwatch/config.hpp"
#include "bucketwatch/detector.hpp"
#include "bucketwatch/error.hpp"
#include "bucketwatch/evaluator.hpp"
#include "bucketwatch/io.hpp"
#include "bucketwatch/markov.hpp"
#include "bucketwatch/profiler.hpp"
#include "bucketwatch/rng.hpp"
#include "bucketwatch/workload.hpp"

namespace fs = std::filesystem;
using namespace bucketwatch;

namespace {

constexpr const char* kConfigEnv = "BUCKETWATCH_CONFIG";

struct CommonOpts {
  std::string config_path;
};

Config resolve_config(const CommonOpts& o) {
  std::string path = o.config_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnv)) path = env;
  return path.empty() ? Config{} : load_config(path);
}

std::set<std::string> csv_set(const std::string& s) {
  std::set<std::string> out;
  for (auto f : split_fields(s))
    if (!f.empty()) out.emplace(f);
  return out;
}

// "profile.json" -> "profile.walks.json"
fs::path walks_path_for(const fs::path& profile) {
  fs::path p = profile;
  return p.replace_extension(".walks.json");
}

DepthRange parse_range(const std::string& s) {
  const auto colon = s.find(':');
  double lo = 0.0;
  double hi = 0.0;
  if (colon == std::string::npos || !parse_double(std::string_view(s).substr(0, colon), lo) ||
      !parse_double(std::string_view(s).substr(colon + 1), hi) || lo != static_cast<int>(lo) ||
      hi != static_cast<int>(hi))
    throw Error(ErrorCategory::InvalidArgument, "depth range must look like MIN:MAX, got '" + s + "'");
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

// ---- profile ----

struct ProfileOpts {
  CommonOpts common;
  std::string input;
  std::string out;
  std::string walks_out;
  std::string validation_out;
  std::optional<double> split;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> include;
  std::optional<std::string> exclude;
  std::optional<int> buckets;
  std::optional<std::string> direction;
};

int cmd_profile(const ProfileOpts& o) {
  Config cfg = resolve_config(o.common);
  if (o.split) cfg.profiling.split = *o.split;
  if (o.seed) cfg.profiling.seed = *o.seed;
  if (o.include) cfg.profiling.include = csv_set(*o.include);
  if (o.exclude) cfg.profiling.exclude = csv_set(*o.exclude);
  if (o.buckets) cfg.monitor.detector.buckets = *o.buckets;
  if (o.direction) cfg.monitor.detector.direction = direction_from_string(*o.direction);
  cfg.validate();

  const RunSet all = filter_transactions(load_samples(o.input), cfg.profiling.include, cfg.profiling.exclude);
  auto [prof_runs, val_runs] = split_runs(all, cfg.profiling.split, cfg.profiling.seed);
  const BaselineProfile profile = compute_baseline(prof_runs, SplitTag::Profile);

  WalkEstimates walks;
  walks.buckets = cfg.monitor.detector.buckets;
  walks.direction = cfg.monitor.detector.direction;
  std::size_t skipped = 0;
  for (const auto& [key, values] : values_by_key(prof_runs)) {
    if (values.size() < cfg.profiling.min_samples) {
      ++skipped;
      continue;
    }
    walks.entries.emplace(key, estimate_walk_params(values, *profile.find(key), walks.buckets,
                                                    walks.direction, cfg.profiling.min_samples));
  }

  save_profile(profile, o.out);
  const fs::path walks_path = o.walks_out.empty() ? walks_path_for(o.out) : fs::path(o.walks_out);
  write_file_atomic(walks_path, walks_to_json(walks));
  if (!o.validation_out.empty()) write_file_atomic(o.validation_out, samples_to_csv(val_runs));

  std::cout << "profile: " << profile.entries.size() << " keys from " << prof_runs.runs.size()
            << " runs (validation: " << val_runs.runs.size() << " runs)\n";
  std::cout << "walks: " << walks.entries.size() << " keys";
  if (skipped) std::cout << " (" << skipped << " keys below " << cfg.profiling.min_samples << " samples)";
  std::cout << " -> " << walks_path.string() << "\n";
  return 0;
}

// ---- calibrate ----

struct CalibrateOpts {
  CommonOpts common;
  std::string walks;
  std::string profile;
  std::string key;
  std::vector<double> p;
  std::optional<double> alpha;
  std::optional<double> target_f;
  std::optional<double> w;
  std::optional<std::string> model;
  std::optional<std::string> d_range;
  std::optional<std::string> source;
  std::string out_csv;
  std::string out_json;
  bool infer_w = false;
};

WalkParams pick_walk(const CalibrateOpts& o) {
  if (!o.p.empty()) {
    WalkParams w{o.p};
    w.validate();
    return w;
  }
  std::string path = o.walks;
  if (path.empty() && !o.profile.empty()) path = walks_path_for(o.profile).string();
  if (path.empty()) throw Error(ErrorCategory::InvalidArgument, "give --p, --walks or --profile");
  const WalkEstimates walks = walks_from_json(read_file(path));
  if (o.key.empty()) {
    if (walks.entries.size() != 1)
      throw Error(ErrorCategory::InvalidArgument,
                  "--key is required: " + path + " holds " + std::to_string(walks.entries.size()) + " keys");
    return walks.entries.begin()->second;
  }
  const StreamKey key = parse_stream_key(o.key);
  auto it = walks.entries.find(key);
  if (it == walks.entries.end()) throw Error(ErrorCategory::MissingKey, "no walk estimate for key " + o.key);
  return it->second;
}

int cmd_calibrate(const CalibrateOpts& o) {
  Config cfg = resolve_config(o.common);
  CalibrationQuery& q = cfg.calibration;
  if (o.alpha) q.alpha = *o.alpha;
  if (o.target_f) q.target_f = *o.target_f;
  if (o.w) q.w = *o.w;
  if (o.model) q.model = false_alarm_model_from_string(*o.model);
  if (o.d_range) q.range = parse_range(*o.d_range);
  if (o.source) q.source = absorption_source_from_string(*o.source);
  q.validate();

  const WalkParams p = pick_walk(o);
  const CalibrationReport report = calibrate(p, q);
  if (!o.out_csv.empty()) write_file_atomic(o.out_csv, report_to_csv(report));
  if (!o.out_json.empty()) write_file_atomic(o.out_json, report_to_json(report));

  std::cout << "B=" << report.buckets << " model=" << to_string(q.model) << " alpha=" << format_double(q.alpha)
            << " F=" << format_double(q.target_f) << " w=" << format_double(q.w)
            << " source=" << to_string(q.source) << "\n";
  if (report.chosen_hard)
    std::cout << "chosen_hard: D=" << *report.chosen_hard << "\n";
  else
    std::cout << "chosen_hard: infeasible\n";
  std::cout << "chosen_soft: D=" << report.chosen_soft << "\n";
  std::cout << "lower_bound_L: " << report.lower_bound_samples() << "\n";
  if (o.infer_w) {
    const double w = infer_weight(p, q.alpha, q.target_f, q.model, q.range, q.source);
    std::cout << "inferred_w: " << format_double(w) << "\n";
  }
  return 0;
}

// ---- detect ----

struct DetectOpts {
  CommonOpts common;
  std::string profile;
  std::string input;
  std::string alerts;
  std::optional<int> buckets;
  std::optional<int> depth;
  std::optional<std::string> direction;
  bool skip_unprofiled = false;
};

void echo_alert(const AlertEvent& a) {
  std::cout << "alert," << a.run_id << ',' << to_string(a.key) << ',' << a.sample_index << ','
            << format_double(a.time) << '\n'
            << std::flush;
}

int cmd_detect(const DetectOpts& o) {
  Config cfg = resolve_config(o.common);
  if (o.buckets) cfg.monitor.detector.buckets = *o.buckets;
  if (o.depth) cfg.monitor.detector.depth = *o.depth;
  if (o.direction) cfg.monitor.detector.direction = direction_from_string(*o.direction);
  if (o.skip_unprofiled) cfg.monitor.skip_unprofiled = true;
  cfg.validate();
  const BaselineProfile profile = load_profile(o.profile);

  std::vector<AlertEvent> alerts;
  if (o.input == "-") {
    // Live mode: one sample at a time, alerts echoed as they fire.
    Monitor monitor(profile, cfg.monitor);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(std::cin, line)) throw Error(ErrorCategory::Parse, "line 1: missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kSampleCsvHeader)
      throw Error(ErrorCategory::Parse, "line 1: header must be exactly '" + std::string(kSampleCsvHeader) + "'");
    while (std::getline(std::cin, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      auto [run_id, sample] = parse_sample_row(line, line_no);
      if (auto a = monitor.push(run_id, sample)) {
        echo_alert(*a);
        alerts.push_back(std::move(*a));
      }
    }
  } else {
    alerts = detect_runs(load_samples(o.input), profile, cfg.monitor);
  }
  write_file_atomic(o.alerts, alerts_to_json(alerts));
  std::cout << "alerts: " << alerts.size() << " -> " << o.alerts << "\n";
  return 0;
}

// ---- simulate ----

struct SimulateOpts {
  CommonOpts common;
  std::string out_dir;
  std::optional<std::size_t> n_runs;
  std::optional<std::size_t> golden_runs;
  std::optional<std::uint64_t> seed;
  std::optional<double> degradation;
};

int cmd_simulate(const SimulateOpts& o) {
  Config cfg = resolve_config(o.common);
  SimulationConfig& sim = cfg.simulation;
  if (!sim.workload) sim.workload = default_workload({{"G1", "TRADE_LOOKUP", 1.0}});
  if (sim.faults.empty()) sim.faults = default_fault_campaign();
  if (o.n_runs) sim.n_runs = *o.n_runs;
  if (o.golden_runs) sim.golden_runs = *o.golden_runs;
  if (o.seed) sim.seed = *o.seed;
  if (o.degradation)
    for (auto& f : sim.faults) f.degradation = *o.degradation;
  cfg.validate();
  const WorkloadSpec& spec = *sim.workload;

  const RunSet golden = generate_golden(spec, sim.golden_runs, sim.seed, "golden");
  RunSet faulted;
  faulted.role = RunRole::Faulted;
  std::vector<LabeledRun> labeled;
  for (std::size_t i = 0; i < sim.faults.size(); ++i) {
    const FaultSpec& f = sim.faults[i];
    const RunSet base = generate_golden(spec, sim.n_runs, mix64(sim.seed + i + 1), f.model_name());
    for (const Run& r : base.runs) {
      LabeledRun lr = inject_fault(r, spec, f);
      faulted.runs.push_back(lr.run);
      labeled.push_back(std::move(lr));
    }
  }

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_file_atomic(dir / "golden.csv", samples_to_csv(golden));
  write_file_atomic(dir / "faulted.csv", samples_to_csv(faulted));
  write_file_atomic(dir / "schedules.json", schedules_to_json(labeled));
  write_file_atomic(dir / "workload.json", workload_to_json(spec));
  std::cout << "golden: " << golden.runs.size() << " runs, faulted: " << faulted.runs.size() << " runs ("
            << sim.faults.size() << " fault models) -> " << dir.string() << "\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  CommonOpts common;
  std::string alerts;
  std::string schedules;
  std::string out;
  std::optional<double> c;
  std::optional<double> delta;
  std::optional<int> buckets;
  std::optional<int> depth;
};

int cmd_evaluate(const EvaluateOpts& o) {
  Config cfg = resolve_config(o.common);
  if (o.c) cfg.evaluation.c = *o.c;
  if (o.delta) cfg.evaluation.delta = *o.delta;
  if (o.buckets) cfg.monitor.detector.buckets = *o.buckets;
  if (o.depth) cfg.monitor.detector.depth = *o.depth;
  cfg.validate();

  const auto runs = schedules_from_json(read_file(o.schedules));
  const auto alerts = alerts_from_json(read_file(o.alerts));
  ResidualPolicy policy{0.0, cfg.evaluation.c};
  if (cfg.evaluation.delta) {
    policy.delta = *cfg.evaluation.delta;
  } else {
    try {
      policy.delta = mean_time_to_first_alarm(runs, alerts);
    } catch (const Error&) {
      policy.delta = 0.0;  // no attack-phase alarm to time
    }
  }
  const auto report =
      evaluate(runs, alerts, policy, cfg.monitor.detector.buckets, cfg.monitor.detector.depth);

  fs::path out(o.out);
  const auto ext = out.extension();
  if (ext == ".csv") {
    write_file_atomic(out, evaluation_to_csv(report));
  } else if (ext == ".json") {
    write_file_atomic(out, evaluation_to_json(report));
  } else {
    write_file_atomic(fs::path(o.out + ".csv"), evaluation_to_csv(report));
    write_file_atomic(fs::path(o.out + ".json"), evaluation_to_json(report));
  }
  std::cout << "delta=" << format_double(policy.delta) << " c=" << format_double(policy.c) << "\n"
            << evaluation_to_csv(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bucket Algorithm anomaly detection with Markov-chain depth calibration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "bucketwatch 1.0.0");

  auto add_config = [](CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path,
                    std::string("JSON config (default: $") + kConfigEnv + ")");
  };

  ProfileOpts po;
  auto* profile = app.add_subcommand("profile", "Split golden runs and extract baselines");
  add_config(profile, po.common);
  profile->add_option("--input", po.input, "Golden-run CSV")->required();
  profile->add_option("--out", po.out, "Profile JSON to write")->required();
  profile->add_option("--walks", po.walks_out, "Walk estimates JSON (default: <out>.walks.json)");
  profile->add_option("--validation-out", po.validation_out, "Write the validation split as CSV");
  profile->add_option("--split", po.split, "Fraction of runs in the profile split");
  profile->add_option("--seed", po.seed, "Split seed");
  profile->add_option("--include", po.include, "Comma-separated transactions to keep");
  profile->add_option("--exclude", po.exclude, "Comma-separated transactions to drop");
  profile->add_option("-B,--buckets", po.buckets, "Bucket count for walk estimates");
  profile->add_option("--direction", po.direction, "lower | higher");

  CalibrateOpts co;
  auto* calib = app.add_subcommand("calibrate", "Sweep D and choose the bucket depth");
  add_config(calib, co.common);
  calib->add_option("--walks", co.walks, "Walk estimates JSON");
  calib->add_option("--profile", co.profile, "Profile JSON; reads the walks file written beside it");
  calib->add_option("--key", co.key, "group/transaction/phase");
  calib->add_option("--p", co.p, "Walk parameters p1,...,pB")->delimiter(',');
  calib->add_option("--alpha", co.alpha, "Anomaly rate per sample");
  calib->add_option("--F", co.target_f, "Target false-alarm probability");
  calib->add_option("--w", co.w, "Cost weight");
  calib->add_option("--model", co.model, "deterministic | exponential");
  calib->add_option("--d-range", co.d_range, "MIN:MAX");
  calib->add_option("--source", co.source, "auto | closed_form | exact");
  calib->add_option("--out-csv", co.out_csv, "Sweep table CSV");
  calib->add_option("--out-json", co.out_json, "Report JSON");
  calib->add_flag("--infer-w", co.infer_w, "Also print the weight matching the hard choice");

  DetectOpts dopt;
  auto* detect = app.add_subcommand("detect", "Run detectors over samples");
  add_config(detect, dopt.common);
  detect->add_option("--profile", dopt.profile, "Profile JSON")->required();
  detect->add_option("--input", dopt.input, "Sample CSV, or - for standard input")->required();
  detect->add_option("--alerts", dopt.alerts, "Alerts JSON to write")->required();
  detect->add_option("-B,--buckets", dopt.buckets, "Bucket count");
  detect->add_option("-D,--depth", dopt.depth, "Bucket depth");
  detect->add_option("--direction", dopt.direction, "lower | higher");
  detect->add_flag("--skip-unprofiled", dopt.skip_unprofiled, "Ignore keys missing from the profile");

  SimulateOpts so;
  auto* simulate = app.add_subcommand("simulate", "Generate golden and fault-injected runs");
  add_config(simulate, so.common);
  simulate->add_option("--out-dir", so.out_dir, "Output directory")->required();
  simulate->add_option("--runs", so.n_runs, "Runs per fault model");
  simulate->add_option("--golden-runs", so.golden_runs, "Golden runs");
  simulate->add_option("--seed", so.seed, "Seed");
  simulate->add_option("--degradation", so.degradation, "Mean multiplier during faults");

  EvaluateOpts eo;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Classify alerts and compute Pr/Re/F1");
  add_config(evaluate_cmd, eo.common);
  evaluate_cmd->add_option("--alerts", eo.alerts, "Alerts JSON")->required();
  evaluate_cmd->add_option("--schedules", eo.schedules, "Schedules JSON")->required();
  evaluate_cmd->add_option("--out", eo.out, "Report path (.csv, .json, or a stem for both)")->required();
  evaluate_cmd->add_option("--c", eo.c, "Residual window multiplier");
  evaluate_cmd->add_option("--delta", eo.delta, "Mean time to first alarm (default: measured)");
  evaluate_cmd->add_option("-B,--buckets", eo.buckets, "B label for the report");
  evaluate_cmd->add_option("-D,--depth", eo.depth, "D label for the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: invalid_argument: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*profile) return cmd_profile(po);
    if (*calib) return cmd_calibrate(co);
    if (*detect) return cmd_detect(dopt);
    if (*simulate) return cmd_simulate(so);
    if (*evaluate_cmd) return cmd_evaluate(eo);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.category()) << ": " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
