#pragma once

// Synthetic golden runs and fault injection.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bucketwatch/types.hpp"

namespace bucketwatch {

struct PhaseSpec {
  std::string id;
  double duration = 720.0;  // seconds
  double mean = 100.0;      // tps
  double sigma = 10.0;      // tps
};

// A monitored (group, transaction) pair; phase mean and sigma are scaled by
// `scale` for this key.
struct KeySpec {
  std::string group;
  std::string transaction;
  double scale = 1.0;
};

struct WorkloadSpec {
  std::vector<KeySpec> keys;
  std::vector<PhaseSpec> phases;
  double sample_interval = 1.0;  // seconds

  void validate() const;
  double total_duration() const noexcept;
  std::size_t samples_per_key() const noexcept;
  // Index into `phases`; throws Error(InvalidArgument) if absent.
  std::size_t phase_index(std::string_view id) const;
  double phase_start(std::size_t index) const noexcept;
};

enum class FaultPattern { H, L, Ls };

std::string_view to_string(FaultPattern p) noexcept;
FaultPattern fault_pattern_from_string(std::string_view s);

// Half-open [begin, end) in seconds since run start.
struct Interval {
  double begin = 0.0;
  double end = 0.0;

  bool contains(double t) const noexcept { return t >= begin && t < end; }
  double length() const noexcept { return end - begin; }
  bool operator==(const Interval&) const = default;
};

struct FaultSpec {
  FaultPattern pattern = FaultPattern::H;
  std::string phase_id;
  double degradation = 0.6;   // mean multiplier in (0, 1]
  double start_offset = 0.0;  // seconds into the phase

  void validate() const;
  // Active windows relative to the attack start.
  std::vector<Interval> windows() const;
  // Attack span: 300 s for H and L, 90 s for Ls.
  double span() const noexcept;
  // "<phase><pattern>", e.g. "4H".
  std::string model_name() const;
};

struct Schedule {
  Interval pre;
  Interval attack;
  Interval post;

  bool has_attack() const noexcept { return attack.length() > 0.0; }
  bool operator==(const Schedule&) const = default;
};

struct LabeledRun {
  Run run;
  Schedule schedule;
  std::string fault_model;       // "golden" for fault-free runs
  std::vector<Interval> windows;  // absolute active windows
};

// One sample per key per interval; values are Normal(mean, sigma) scaled
// per key and clamped at 0. Run i uses CounterRng::split(seed, i); run ids
// are "<prefix>-NNNN".
RunSet generate_golden(const WorkloadSpec& spec, std::size_t n_runs, std::uint64_t seed,
                       std::string_view prefix = "golden");

// Shifts every sample inside an active window down by (1 - degradation) of
// its key's phase mean, clamped at 0. Samples outside the windows are not
// touched. Throws Error(InvalidArgument) if the attack does not fit in the
// phase.
LabeledRun inject_fault(const Run& run, const WorkloadSpec& spec, const FaultSpec& fault);

// Fault-free run labelled with a single pre interval.
LabeledRun label_golden(const Run& run, const WorkloadSpec& spec);

inline constexpr int kScheduleFormatVersion = 1;

// Sidecar document: {version, runs:[{run_id, fault_model, pre, attack, post, windows}]}.
std::string schedules_to_json(const std::vector<LabeledRun>& runs);
// Loads schedules only; the `run` member keeps just its run_id.
std::vector<LabeledRun> schedules_from_json(std::string_view text);

WorkloadSpec workload_from_json(std::string_view text);
std::string workload_to_json(const WorkloadSpec& spec);

}  // namespace bucketwatch
