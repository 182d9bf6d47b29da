#include "bucketwatch/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "bucketwatch/error.hpp"

namespace bucketwatch {

std::string to_string(const StreamKey& key) {
  return key.group + "/" + key.transaction + "/" + key.phase;
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::LowerIsAnomalous ? "lower" : "higher";
}

Direction direction_from_string(std::string_view s) {
  if (s == "lower" || s == "LowerIsAnomalous") return Direction::LowerIsAnomalous;
  if (s == "higher" || s == "HigherIsAnomalous") return Direction::HigherIsAnomalous;
  throw Error(ErrorCategory::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

void DetectorConfig::validate() const {
  if (buckets < 1) throw Error(ErrorCategory::InvalidArgument, "bucket count must be >= 1");
  if (depth < 1) throw Error(ErrorCategory::InvalidArgument, "bucket depth must be >= 1");
}

void BaselineStats::validate() const {
  if (!std::isfinite(mu) || !std::isfinite(sigma))
    throw Error(ErrorCategory::InvalidArgument, "baseline moments must be finite");
  if (!(sigma > 0.0)) throw Error(ErrorCategory::InvalidArgument, "baseline sigma must be > 0");
  if (n < 2) throw Error(ErrorCategory::InvalidArgument, "baseline needs at least 2 samples");
}

DetectorState detector_reset(const DetectorConfig&) { return DetectorState{}; }

StepResult detector_step(const DetectorState& state, double sample, const BaselineStats& baseline,
                         const DetectorConfig& cfg) {
  cfg.validate();
  baseline.validate();
  if (!std::isfinite(sample))
    throw Error(ErrorCategory::InvalidArgument, "sample value must be finite");
  if (state.alarmed)
    throw Error(ErrorCategory::InvalidArgument, "detector must be reset after an alarm");

  const int add = is_anomalous(sample, baseline.mu, baseline.sigma, state.bucket, cfg.direction);
  const auto next = advance_bucket<int>(state.bucket, state.depth, add, cfg.buckets, cfg.depth);
  return {DetectorState{next.bucket, next.depth, next.alarm != 0}, next.alarm != 0};
}

DetectorConfig MonitorConfig::for_key(const StreamKey& key) const {
  DetectorConfig cfg = detector;
  if (auto it = depth_by_transaction.find(key.transaction); it != depth_by_transaction.end())
    cfg.depth = it->second;
  return cfg;
}

void MonitorConfig::validate() const {
  detector.validate();
  for (const auto& [tx, depth] : depth_by_transaction)
    if (depth < 1)
      throw Error(ErrorCategory::InvalidArgument, "depth for transaction '" + tx + "' must be >= 1");
}

Monitor::Monitor(const BaselineProfile& profile, MonitorConfig cfg)
    : profile_(profile), cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::optional<AlertEvent> Monitor::push(std::string_view run_id, const Sample& sample) {
  auto id = std::make_pair(std::string(run_id), sample.key);
  auto it = channels_.find(id);
  if (it == channels_.end()) {
    const BaselineStats* baseline = profile_.find(sample.key);
    if (baseline == nullptr && cfg_.skip_unprofiled) return std::nullopt;
    if (baseline == nullptr)
      throw Error(ErrorCategory::MissingKey, "no baseline for key " + to_string(sample.key));
    baseline->validate();
    const DetectorConfig cfg = cfg_.for_key(sample.key);
    it = channels_.emplace(std::move(id), Channel{cfg, *baseline, detector_reset(cfg), 0}).first;
  }
  Channel& ch = it->second;
  ++ch.count;
  const StepResult r = detector_step(ch.state, sample.value, ch.baseline, ch.cfg);
  if (!r.alarm) {
    ch.state = r.state;
    return std::nullopt;
  }
  ch.state = detector_reset(ch.cfg);
  return AlertEvent{std::string(run_id), sample.key, ch.count, sample.t};
}

const DetectorState* Monitor::state(std::string_view run_id, const StreamKey& key) const {
  auto it = channels_.find(std::make_pair(std::string(run_id), key));
  return it == channels_.end() ? nullptr : &it->second.state;
}

std::vector<AlertEvent> run_detector_serial(std::span<const Sample> samples,
                                            const BaselineProfile& profile,
                                            const MonitorConfig& cfg, std::string_view run_id) {
  Monitor monitor(profile, cfg);
  std::vector<AlertEvent> alerts;
  for (const Sample& s : samples)
    if (auto a = monitor.push(run_id, s)) alerts.push_back(std::move(*a));
  return alerts;
}

std::vector<AlertEvent> run_detector(std::span<const Sample> samples, const BaselineProfile& profile,
                                     const MonitorConfig& cfg, std::string_view run_id) {
  cfg.validate();

  // Partition stream positions by key, first-seen order.
  std::map<StreamKey, std::size_t> slot;
  std::vector<std::vector<std::size_t>> positions;
  std::vector<const StreamKey*> keys;
  std::set<StreamKey> skipped;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (skipped.contains(samples[i].key)) continue;
    auto [it, inserted] = slot.try_emplace(samples[i].key, positions.size());
    if (inserted) {
      const BaselineStats* baseline = profile.find(samples[i].key);
      if (baseline == nullptr && cfg.skip_unprofiled) {
        slot.erase(it);
        skipped.insert(samples[i].key);
        continue;
      }
      if (baseline == nullptr)
        throw Error(ErrorCategory::MissingKey, "no baseline for key " + to_string(samples[i].key));
      baseline->validate();
      positions.emplace_back();
      keys.push_back(&it->first);
    }
    positions[it->second].push_back(i);
  }
  for (const Sample& s : samples)
    if (!std::isfinite(s.value))
      throw Error(ErrorCategory::InvalidArgument, "sample value must be finite");

  // (stream position, per-key ordinal) of every alarm, per key.
  std::vector<std::vector<std::pair<std::size_t, std::uint64_t>>> fired(positions.size());
  const auto key_count = static_cast<std::ptrdiff_t>(positions.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < key_count; ++k) {
    const StreamKey& key = *keys[static_cast<std::size_t>(k)];
    const BaselineStats& baseline = *profile.find(key);
    const DetectorConfig dc = cfg.for_key(key);
    int bucket = 1;
    int depth = 0;
    std::uint64_t ordinal = 0;
    for (std::size_t pos : positions[static_cast<std::size_t>(k)]) {
      ++ordinal;
      const int add = is_anomalous(samples[pos].value, baseline.mu, baseline.sigma, bucket,
                                   dc.direction);
      const auto next = advance_bucket<int>(bucket, depth, add, dc.buckets, dc.depth);
      if (next.alarm) {
        fired[static_cast<std::size_t>(k)].emplace_back(pos, ordinal);
        bucket = 1;
        depth = 0;
      } else {
        bucket = next.bucket;
        depth = next.depth;
      }
    }
  }

  std::vector<std::pair<std::size_t, AlertEvent>> merged;
  for (std::size_t k = 0; k < fired.size(); ++k)
    for (auto [pos, ordinal] : fired[k])
      merged.emplace_back(pos, AlertEvent{std::string(run_id), *keys[k], ordinal, samples[pos].t});
  std::sort(merged.begin(), merged.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<AlertEvent> alerts;
  alerts.reserve(merged.size());
  for (auto& [pos, alert] : merged) alerts.push_back(std::move(alert));
  return alerts;
}

std::vector<AlertEvent> detect_runs(const RunSet& runs, const BaselineProfile& profile,
                                    const MonitorConfig& cfg) {
  std::vector<AlertEvent> alerts;
  for (const Run& run : runs.runs) {
    auto a = run_detector(run.samples, profile, cfg, run.run_id);
    alerts.insert(alerts.end(), std::make_move_iterator(a.begin()), std::make_move_iterator(a.end()));
  }
  return alerts;
}

}  // namespace bucketwatch
