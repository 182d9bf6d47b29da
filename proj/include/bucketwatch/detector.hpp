#pragma once

// The Bucket Algorithm: B buckets of depth D. Each sample on the anomalous
// side of the current bucket's threshold adds a ball, any other sample
// removes one. Overflowing a bucket moves to the next (stricter) threshold,
// underflowing moves back. Overflowing the last bucket raises an alarm.

#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bucketwatch/profile.hpp"
#include "bucketwatch/types.hpp"

namespace bucketwatch {

enum class Direction { LowerIsAnomalous, HigherIsAnomalous };

std::string_view to_string(Direction d) noexcept;
Direction direction_from_string(std::string_view s);

struct DetectorConfig {
  int buckets = 2;
  int depth = 15;
  Direction direction = Direction::LowerIsAnomalous;

  void validate() const;

  bool operator==(const DetectorConfig&) const = default;
};

// Invariant: 1 <= bucket <= B and 0 <= depth <= D. An alarmed state is
// saturated at (B, D) and must be reset before it is stepped again.
struct DetectorState {
  int bucket = 1;
  int depth = 0;
  bool alarmed = false;

  bool operator==(const DetectorState&) const = default;
};

struct AlertEvent {
  std::string run_id;
  StreamKey key;
  std::uint64_t sample_index = 0;  // 1-based ordinal within the key's stream
  double time = 0.0;

  bool operator==(const AlertEvent&) const = default;
};

struct StepResult {
  DetectorState state;
  bool alarm = false;
};

template <std::signed_integral I>
struct BucketTransition {
  I bucket;
  I depth;
  I alarm;
};

// One ball added (add = 1) or removed (add = 0). Written without branches
// so the batched kernels can run it across SIMD lanes; every stepping path
// in the library goes through this function.
template <std::signed_integral I>
constexpr BucketTransition<I> advance_bucket(I bucket, I depth, I add, I buckets,
                                             I max_depth) noexcept {
  I d = depth + 2 * add - 1;
  const I over = d > max_depth;
  const I under = d < 0;
  const I back = under & static_cast<I>(bucket > 1);
  I b = bucket + over - back;
  d = over ? I{0} : (back ? max_depth : (under ? I{0} : d));
  const I alarm = b > buckets;
  b = alarm ? buckets : b;
  d = alarm ? max_depth : d;
  return {b, d, alarm};
}

// Threshold test for bucket b: value < mu - (b-1) sigma when low values are
// anomalous, value > mu + (b-1) sigma otherwise. Equality is non-anomalous.
constexpr bool is_anomalous(double value, double mu, double sigma, int bucket,
                            Direction direction) noexcept {
  const double shift = static_cast<double>(bucket - 1) * sigma;
  return direction == Direction::LowerIsAnomalous ? value < mu - shift : value > mu + shift;
}

DetectorState detector_reset(const DetectorConfig& cfg);

// Throws Error(InvalidArgument) on an invalid baseline or config, a
// non-finite sample, or an already alarmed state.
StepResult detector_step(const DetectorState& state, double sample, const BaselineStats& baseline,
                         const DetectorConfig& cfg);

// Detector settings for a whole monitoring surface. A transaction may carry
// its own depth; everything else is shared.
struct MonitorConfig {
  DetectorConfig detector;
  std::map<std::string, int> depth_by_transaction;
  // Keys without a baseline are ignored instead of raising MissingKey.
  bool skip_unprofiled = false;

  DetectorConfig for_key(const StreamKey& key) const;
  void validate() const;
};

// Streaming front end: one detector per (run, key), auto-reset after every
// alarm. Samples must arrive in time order per key.
class Monitor {
 public:
  Monitor(const BaselineProfile& profile, MonitorConfig cfg);

  std::optional<AlertEvent> push(std::string_view run_id, const Sample& sample);

  const DetectorState* state(std::string_view run_id, const StreamKey& key) const;

 private:
  struct Channel {
    DetectorConfig cfg;
    BaselineStats baseline;
    DetectorState state;
    std::uint64_t count = 0;
  };

  const BaselineProfile& profile_;
  MonitorConfig cfg_;
  std::map<std::pair<std::string, StreamKey>, Channel> channels_;
};

// Runs every key of one run's stream. Keys are stepped in parallel; the
// result is ordered by stream position. Throws Error(MissingKey) naming the
// first key without a baseline.
std::vector<AlertEvent> run_detector(std::span<const Sample> samples, const BaselineProfile& profile,
                                     const MonitorConfig& cfg, std::string_view run_id = {});

// Single-threaded reference for run_detector (drives a Monitor).
std::vector<AlertEvent> run_detector_serial(std::span<const Sample> samples,
                                            const BaselineProfile& profile,
                                            const MonitorConfig& cfg, std::string_view run_id = {});

// run_detector over every run, detectors fresh per run; alerts in run order.
std::vector<AlertEvent> detect_runs(const RunSet& runs, const BaselineProfile& profile,
                                    const MonitorConfig& cfg);

}  // namespace bucketwatch
