#include "bucketwatch/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "bucketwatch/error.hpp"
#include "bucketwatch/io.hpp"
#include "bucketwatch/rng.hpp"

namespace bucketwatch {

using nlohmann::ordered_json;

std::string_view to_string(SplitTag tag) noexcept {
  return tag == SplitTag::Profile ? "profile" : "validation";
}

SplitTag split_tag_from_string(std::string_view s) {
  if (s == "profile") return SplitTag::Profile;
  if (s == "validation") return SplitTag::Validation;
  throw Error(ErrorCategory::Parse, "unknown split tag '" + std::string(s) + "'");
}

namespace {

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCategory::Parse, "line " + std::to_string(line_no) + ": " + what);
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::pair<std::string, Sample> parse_sample_row(std::string_view line, std::size_t line_no) {
  const auto f = split_fields(trim_cr(line));
  if (f.size() != 6)
    row_error(line_no, "expected 6 fields, got " + std::to_string(f.size()));
  for (std::size_t i = 0; i < 4; ++i)
    if (f[i].empty()) row_error(line_no, "empty identifier field");
  Sample s;
  s.key = StreamKey{std::string(f[1]), std::string(f[2]), std::string(f[3])};
  if (!parse_double(f[4], s.t) || !std::isfinite(s.t)) row_error(line_no, "bad t_seconds");
  if (s.t < 0.0) row_error(line_no, "negative t_seconds");
  if (!parse_double(f[5], s.value) || !std::isfinite(s.value))
    row_error(line_no, "bad throughput_tps");
  if (s.value < 0.0) row_error(line_no, "negative throughput_tps");
  return {std::string(f[0]), std::move(s)};
}

RunSet parse_samples(std::istream& in, RunRole role) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCategory::Parse, "line 1: missing header");
  if (trim_cr(line) != kSampleCsvHeader) {
    for (auto col : split_fields(trim_cr(line)))
      if (kSampleCsvHeader.find(col) == std::string_view::npos || col.empty())
        throw Error(ErrorCategory::Parse, "line 1: unknown column '" + std::string(col) + "'");
    throw Error(ErrorCategory::Parse,
                "line 1: header must be exactly '" + std::string(kSampleCsvHeader) + "'");
  }

  std::map<std::string, std::vector<Sample>> by_run;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_cr(line).empty()) continue;
    auto [run_id, sample] = parse_sample_row(line, line_no);
    by_run[run_id].push_back(std::move(sample));
  }

  RunSet out;
  out.role = role;
  for (auto& [run_id, samples] : by_run) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) { return a.t < b.t; });
    out.runs.push_back(Run{run_id, std::move(samples)});
  }
  return out;
}

RunSet load_samples(const std::filesystem::path& path, RunRole role) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::Io, "cannot open " + path.string());
  return parse_samples(in, role);
}

std::string samples_to_csv(const RunSet& runs) {
  std::string out(kSampleCsvHeader);
  out += '\n';
  for (const Run& run : runs.runs)
    for (const Sample& s : run.samples) {
      out += run.run_id;
      out += ',';
      out += s.key.group;
      out += ',';
      out += s.key.transaction;
      out += ',';
      out += s.key.phase;
      out += ',';
      out += format_double(s.t);
      out += ',';
      out += format_double(s.value);
      out += '\n';
    }
  return out;
}

RunSet filter_transactions(const RunSet& runs, const std::set<std::string>& include,
                           const std::set<std::string>& exclude) {
  RunSet out;
  out.role = runs.role;
  for (const Run& run : runs.runs) {
    Run kept{run.run_id, {}};
    for (const Sample& s : run.samples) {
      const auto& tx = s.key.transaction;
      if ((include.empty() || include.contains(tx)) && !exclude.contains(tx))
        kept.samples.push_back(s);
    }
    out.runs.push_back(std::move(kept));
  }
  return out;
}

std::map<StreamKey, std::vector<double>> values_by_key(const RunSet& runs) {
  std::map<StreamKey, std::vector<double>> out;
  for (const Run& run : runs.runs)
    for (const Sample& s : run.samples) out[s.key].push_back(s.value);
  return out;
}

BaselineProfile compute_baseline(const RunSet& runs, SplitTag tag) {
  auto grouped = values_by_key(runs);
  std::vector<std::pair<const StreamKey*, std::vector<double>*>> work;
  for (auto& [key, values] : grouped) work.emplace_back(&key, &values);

  std::vector<BaselineStats> stats(work.size());
  const auto n_keys = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n_keys; ++i) {
    auto& values = *work[static_cast<std::size_t>(i)].second;
    std::sort(values.begin(), values.end());
    const auto n = static_cast<long double>(values.size());
    long double sum = 0.0L;
    for (double v : values) sum += v;
    const long double mean = sum / n;
    long double ss = 0.0L;
    for (double v : values) ss += (v - mean) * (v - mean);
    auto& st = stats[static_cast<std::size_t>(i)];
    st.n = values.size();
    st.mu = static_cast<double>(mean);
    st.sigma = values.size() > 1 ? static_cast<double>(std::sqrt(ss / (n - 1.0L))) : 0.0;
  }

  BaselineProfile profile;
  profile.split_tag = tag;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const auto& key = *work[i].first;
    if (stats[i].n < 2)
      throw Error(ErrorCategory::InvalidArgument,
                  "key " + to_string(key) + " has fewer than 2 samples");
    if (!(stats[i].sigma > 0.0))
      throw Error(ErrorCategory::InvalidArgument,
                  "key " + to_string(key) + " has constant values (sigma = 0)");
    profile.entries.emplace(key, stats[i]);
  }
  return profile;
}

std::pair<RunSet, RunSet> split_runs(const RunSet& runs, double ratio, std::uint64_t seed) {
  const std::size_t n = runs.runs.size();
  if (n < 2) throw Error(ErrorCategory::InvalidArgument, "need at least 2 runs to split");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw Error(ErrorCategory::InvalidArgument, "split ratio must be in (0, 1)");
  {
    std::set<std::string> ids;
    for (const Run& r : runs.runs)
      if (!ids.insert(r.run_id).second)
        throw Error(ErrorCategory::InvalidArgument, "duplicate run_id '" + r.run_id + "'");
  }
  const auto profile_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))), 1, n - 1);

  // Fisher-Yates over run indices with our own generator, so the split is
  // identical on every platform.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const CounterRng rng(mix64(seed));
  std::uint64_t counter = 0;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1, counter)]);

  std::vector<bool> in_profile(n, false);
  for (std::size_t i = 0; i < profile_count; ++i) in_profile[order[i]] = true;

  RunSet profile;
  RunSet validation;
  profile.role = validation.role = runs.role;
  for (std::size_t i = 0; i < n; ++i) (in_profile[i] ? profile : validation).runs.push_back(runs.runs[i]);
  return {std::move(profile), std::move(validation)};
}

std::string profile_to_json(const BaselineProfile& profile) {
  ordered_json j;
  j["version"] = kProfileFormatVersion;
  j["split_tag"] = to_string(profile.split_tag);
  auto& entries = j["entries"] = ordered_json::array();
  for (const auto& [key, st] : profile.entries)
    entries.push_back({{"group", key.group},
                       {"transaction", key.transaction},
                       {"phase", key.phase},
                       {"mu", st.mu},
                       {"sigma", st.sigma},
                       {"n", st.n}});
  return j.dump(2) + "\n";
}

namespace {

ordered_json parse_json(std::string_view text, std::string_view what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string(what) + ": " + e.what());
  }
}

void check_version(const ordered_json& j, std::string_view what) {
  if (!j.is_object() || !j.contains("version"))
    throw Error(ErrorCategory::Parse, std::string(what) + ": missing version");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kProfileFormatVersion)
    throw Error(ErrorCategory::Version, std::string(what) + ": unsupported version " + j["version"].dump());
}

StreamKey key_from_json(const ordered_json& e) {
  return StreamKey{e.at("group").get<std::string>(), e.at("transaction").get<std::string>(),
                   e.at("phase").get<std::string>()};
}

}  // namespace

BaselineProfile profile_from_json(std::string_view text) {
  const auto j = parse_json(text, "profile");
  check_version(j, "profile");
  try {
    BaselineProfile profile;
    profile.split_tag = split_tag_from_string(j.at("split_tag").get<std::string>());
    for (const auto& e : j.at("entries")) {
      BaselineStats st{e.at("mu").get<double>(), e.at("sigma").get<double>(),
                       e.at("n").get<std::size_t>()};
      st.validate();
      const auto key = key_from_json(e);
      if (!profile.entries.emplace(key, st).second)
        throw Error(ErrorCategory::Parse, "profile: duplicate key " + to_string(key));
    }
    return profile;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("profile: ") + e.what());
  }
}

void save_profile(const BaselineProfile& profile, const std::filesystem::path& path) {
  write_file_atomic(path, profile_to_json(profile));
}

BaselineProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(read_file(path));
}

WalkEstimates estimate_walks(const RunSet& runs, const BaselineProfile& profile, int buckets,
                             Direction direction, std::size_t min_samples) {
  WalkEstimates out;
  out.buckets = buckets;
  out.direction = direction;
  for (const auto& [key, values] : values_by_key(runs)) {
    const BaselineStats* st = profile.find(key);
    if (st == nullptr) throw Error(ErrorCategory::MissingKey, "no baseline for key " + to_string(key));
    try {
      out.entries.emplace(key, estimate_walk_params(values, *st, buckets, direction, min_samples));
    } catch (const Error& e) {
      throw Error(e.category(), "key " + to_string(key) + ": " + e.what());
    }
  }
  return out;
}

std::string walks_to_json(const WalkEstimates& walks) {
  ordered_json j;
  j["version"] = kProfileFormatVersion;
  j["B"] = walks.buckets;
  j["direction"] = to_string(walks.direction);
  auto& entries = j["entries"] = ordered_json::array();
  for (const auto& [key, w] : walks.entries)
    entries.push_back(
        {{"group", key.group}, {"transaction", key.transaction}, {"phase", key.phase}, {"p", w.p}});
  return j.dump(2) + "\n";
}

WalkEstimates walks_from_json(std::string_view text) {
  const auto j = parse_json(text, "walk estimates");
  check_version(j, "walk estimates");
  try {
    WalkEstimates out;
    out.buckets = j.at("B").get<int>();
    out.direction = direction_from_string(j.at("direction").get<std::string>());
    for (const auto& e : j.at("entries")) {
      WalkParams w{e.at("p").get<std::vector<double>>()};
      w.validate();
      if (w.buckets() != out.buckets)
        throw Error(ErrorCategory::Parse, "walk estimates: entry has wrong bucket count");
      out.entries.emplace(key_from_json(e), std::move(w));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("walk estimates: ") + e.what());
  }
}

StreamKey parse_stream_key(std::string_view text) {
  const auto parts = split_fields(text, '/');
  if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty())
    throw Error(ErrorCategory::InvalidArgument,
                "stream key must look like group/transaction/phase, got '" + std::string(text) + "'");
  return StreamKey{std::string(parts[0]), std::string(parts[1]), std::string(parts[2])};
}

}  // namespace bucketwatch
