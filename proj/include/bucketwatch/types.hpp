#pragma once

#include <compare>
#include <string>
#include <vector>

namespace bucketwatch {

// Monitoring-surface coordinate: one detector runs per key.
struct StreamKey {
  std::string group;
  std::string transaction;
  std::string phase;

  auto operator<=>(const StreamKey&) const = default;
};

std::string to_string(const StreamKey& key);

// One per-second throughput observation.
struct Sample {
  StreamKey key;
  double t = 0.0;      // seconds since run start
  double value = 0.0;  // transactions per second
};

struct Run {
  std::string run_id;
  std::vector<Sample> samples;
};

enum class RunRole { Golden, Faulted };

struct RunSet {
  std::vector<Run> runs;
  RunRole role = RunRole::Golden;

  std::size_t sample_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.samples.size();
    return n;
  }
};

}  // namespace bucketwatch
