#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bucketwatch/detector.hpp"
#include "bucketwatch/markov.hpp"
#include "bucketwatch/profile.hpp"
#include "bucketwatch/types.hpp"

namespace bucketwatch {

// Exact header of the sample CSV.
inline constexpr std::string_view kSampleCsvHeader =
    "run_id,group,transaction,phase,t_seconds,throughput_tps";

// Parses the sample CSV. Runs are ordered by run_id and samples within a run
// by t (stable). Throws Error(Parse) naming the line on any malformed row
// and on unknown or missing columns.
RunSet parse_samples(std::istream& in, RunRole role = RunRole::Golden);
RunSet load_samples(const std::filesystem::path& path, RunRole role = RunRole::Golden);

// Parses one data row; `line_no` only feeds error messages.
std::pair<std::string, Sample> parse_sample_row(std::string_view line, std::size_t line_no);

std::string samples_to_csv(const RunSet& runs);

// Keeps samples whose transaction is in `include` (all when empty) and not in
// `exclude`.
RunSet filter_transactions(const RunSet& runs, const std::set<std::string>& include,
                           const std::set<std::string>& exclude);

// Every key's values, pooled across runs.
std::map<StreamKey, std::vector<double>> values_by_key(const RunSet& runs);

// Per-key mean and sample standard deviation (n - 1 denominator). Values
// are sorted before summation, so the result does not depend on sample or
// run order. Throws Error(InvalidArgument) naming a key with fewer than two
// samples or constant values.
BaselineProfile compute_baseline(const RunSet& runs, SplitTag tag = SplitTag::Profile);

// Seeded run-level split: round(ratio * n) runs (clamped to [1, n-1]) go to
// the profile set, the rest to validation; both keep the input run order.
std::pair<RunSet, RunSet> split_runs(const RunSet& runs, double ratio, std::uint64_t seed);

inline constexpr int kProfileFormatVersion = 1;

std::string profile_to_json(const BaselineProfile& profile);
BaselineProfile profile_from_json(std::string_view text);
void save_profile(const BaselineProfile& profile, const std::filesystem::path& path);
BaselineProfile load_profile(const std::filesystem::path& path);

// Walk parameters estimated per key, stored beside a profile.
struct WalkEstimates {
  int buckets = 2;
  Direction direction = Direction::LowerIsAnomalous;
  std::map<StreamKey, WalkParams> entries;

  bool operator==(const WalkEstimates&) const = default;
};

WalkEstimates estimate_walks(const RunSet& runs, const BaselineProfile& profile, int buckets,
                             Direction direction, std::size_t min_samples = 100);

std::string walks_to_json(const WalkEstimates& walks);
WalkEstimates walks_from_json(std::string_view text);

// "group/transaction/phase"
StreamKey parse_stream_key(std::string_view text);

}  // namespace bucketwatch
