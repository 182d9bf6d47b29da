#include "bucketwatch/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "bucketwatch/error.hpp"
#include "bucketwatch/rng.hpp"

namespace bucketwatch {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCategory::InvalidArgument, what); }

constexpr double kHSpan = 300.0;
constexpr double kBurstOn = 15.0;
constexpr double kBurstPeriod = 30.0;

}  // namespace

void WorkloadSpec::validate() const {
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval))
    invalid("sample interval must be > 0");
  if (phases.empty()) invalid("workload needs at least one phase");
  for (const auto& ph : phases) {
    if (ph.id.empty()) invalid("phase id must not be empty");
    if (!(ph.duration > 0.0) || !std::isfinite(ph.duration))
      invalid("phase " + ph.id + ": duration must be > 0");
    if (!(ph.sigma > 0.0) || !std::isfinite(ph.sigma)) invalid("phase " + ph.id + ": sigma must be > 0");
    if (!std::isfinite(ph.mean) || ph.mean < 0.0) invalid("phase " + ph.id + ": mean must be >= 0");
  }
  for (std::size_t i = 0; i < phases.size(); ++i)
    for (std::size_t j = i + 1; j < phases.size(); ++j)
      if (phases[i].id == phases[j].id) invalid("duplicate phase id " + phases[i].id);
  for (const auto& k : keys) {
    if (k.group.empty() || k.transaction.empty()) invalid("key group/transaction must not be empty");
    if (!(k.scale > 0.0) || !std::isfinite(k.scale)) invalid("key scale must be > 0");
  }
}

double WorkloadSpec::total_duration() const noexcept {
  double total = 0.0;
  for (const auto& ph : phases) total += ph.duration;
  return total;
}

std::size_t WorkloadSpec::samples_per_key() const noexcept {
  std::size_t n = 0;
  for (const auto& ph : phases)
    n += static_cast<std::size_t>(std::ceil(ph.duration / sample_interval - 1e-9));
  return n;
}

std::size_t WorkloadSpec::phase_index(std::string_view id) const {
  for (std::size_t i = 0; i < phases.size(); ++i)
    if (phases[i].id == id) return i;
  invalid("unknown phase '" + std::string(id) + "'");
}

double WorkloadSpec::phase_start(std::size_t index) const noexcept {
  double t = 0.0;
  for (std::size_t i = 0; i < index && i < phases.size(); ++i) t += phases[i].duration;
  return t;
}

std::string_view to_string(FaultPattern p) noexcept {
  switch (p) {
    case FaultPattern::H: return "H";
    case FaultPattern::L: return "L";
    case FaultPattern::Ls: return "Ls";
  }
  return "?";
}

FaultPattern fault_pattern_from_string(std::string_view s) {
  if (s == "H") return FaultPattern::H;
  if (s == "L") return FaultPattern::L;
  if (s == "Ls") return FaultPattern::Ls;
  invalid("unknown fault pattern '" + std::string(s) + "'");
}

void FaultSpec::validate() const {
  if (phase_id.empty()) invalid("fault phase id must not be empty");
  if (!(degradation > 0.0 && degradation <= 1.0)) invalid("degradation must be in (0, 1]");
  if (!(start_offset >= 0.0) || !std::isfinite(start_offset)) invalid("start offset must be >= 0");
}

std::vector<Interval> FaultSpec::windows() const {
  if (pattern == FaultPattern::H) return {{0.0, kHSpan}};
  const int bursts = pattern == FaultPattern::L ? 10 : 3;
  std::vector<Interval> out;
  for (int i = 0; i < bursts; ++i) out.push_back({i * kBurstPeriod, i * kBurstPeriod + kBurstOn});
  return out;
}

double FaultSpec::span() const noexcept {
  switch (pattern) {
    case FaultPattern::H: return kHSpan;
    case FaultPattern::L: return 10 * kBurstPeriod;
    case FaultPattern::Ls: return 3 * kBurstPeriod;
  }
  return 0.0;
}

std::string FaultSpec::model_name() const { return phase_id + std::string(to_string(pattern)); }

RunSet generate_golden(const WorkloadSpec& spec, std::size_t n_runs, std::uint64_t seed,
                       std::string_view prefix) {
  spec.validate();
  RunSet out;
  out.role = RunRole::Golden;
  out.runs.resize(n_runs);

  // Sample time grid and phase of every step, shared by all runs.
  std::vector<double> times;
  std::vector<std::size_t> phase_of;
  double start = 0.0;
  for (std::size_t p = 0; p < spec.phases.size(); ++p) {
    const auto steps =
        static_cast<std::size_t>(std::ceil(spec.phases[p].duration / spec.sample_interval - 1e-9));
    for (std::size_t j = 0; j < steps; ++j) {
      times.push_back(start + static_cast<double>(j) * spec.sample_interval);
      phase_of.push_back(p);
    }
    start += spec.phases[p].duration;
  }

  const auto runs = static_cast<std::ptrdiff_t>(n_runs);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < runs; ++r) {
    const CounterRng rng = CounterRng::split(seed, static_cast<std::uint64_t>(r));
    Run& run = out.runs[static_cast<std::size_t>(r)];
    char id[32];
    std::snprintf(id, sizeof id, "-%04zu", static_cast<std::size_t>(r));
    run.run_id = std::string(prefix) + id;
    run.samples.reserve(times.size() * spec.keys.size());
    std::uint64_t draw = 0;
    for (std::size_t s = 0; s < times.size(); ++s) {
      const PhaseSpec& ph = spec.phases[phase_of[s]];
      for (const KeySpec& k : spec.keys) {
        const double x = k.scale * (ph.mean + ph.sigma * rng.normal(draw++));
        run.samples.push_back(
            Sample{StreamKey{k.group, k.transaction, ph.id}, times[s], std::max(0.0, x)});
      }
    }
  }
  return out;
}

namespace {

double scale_of(const WorkloadSpec& spec, const StreamKey& key) {
  for (const auto& k : spec.keys)
    if (k.group == key.group && k.transaction == key.transaction) return k.scale;
  invalid("key " + to_string(key) + " is not part of the workload");
}

}  // namespace

LabeledRun label_golden(const Run& run, const WorkloadSpec& spec) {
  spec.validate();
  const double end = spec.total_duration();
  LabeledRun out;
  out.run = run;
  out.fault_model = "golden";
  out.schedule = Schedule{{0.0, end}, {end, end}, {end, end}};
  return out;
}

LabeledRun inject_fault(const Run& run, const WorkloadSpec& spec, const FaultSpec& fault) {
  spec.validate();
  fault.validate();
  const std::size_t pi = spec.phase_index(fault.phase_id);
  const PhaseSpec& phase = spec.phases[pi];
  const double phase_begin = spec.phase_start(pi);
  if (fault.start_offset + fault.span() > phase.duration)
    invalid("fault " + fault.model_name() + " does not fit in phase " + phase.id);

  const double t1 = phase_begin + fault.start_offset;
  const double t2 = t1 + fault.span();
  const double end = spec.total_duration();

  LabeledRun out;
  out.run = run;
  out.fault_model = fault.model_name();
  out.schedule = Schedule{{0.0, t1}, {t1, t2}, {t2, end}};
  for (const Interval& w : fault.windows()) out.windows.push_back({t1 + w.begin, t1 + w.end});

  for (Sample& s : out.run.samples) {
    if (s.t < t1 || s.t >= t2) continue;
    const bool active = std::any_of(out.windows.begin(), out.windows.end(),
                                    [&](const Interval& w) { return w.contains(s.t); });
    if (!active || fault.degradation == 1.0) continue;
    const double shift = (1.0 - fault.degradation) * phase.mean * scale_of(spec, s.key);
    s.value = std::max(0.0, s.value - shift);
  }
  return out;
}

namespace {

ordered_json interval_json(const Interval& i) { return ordered_json::array({i.begin, i.end}); }

Interval interval_from(const ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCategory::Parse, "interval must be [begin, end]");
  Interval i{j[0].get<double>(), j[1].get<double>()};
  if (!(i.begin <= i.end)) throw Error(ErrorCategory::Parse, "interval begin exceeds end");
  return i;
}

ordered_json parse_doc(std::string_view text, std::string_view what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string schedules_to_json(const std::vector<LabeledRun>& runs) {
  ordered_json j;
  j["version"] = kScheduleFormatVersion;
  auto& arr = j["runs"] = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json e;
    e["run_id"] = r.run.run_id;
    e["fault_model"] = r.fault_model;
    e["pre"] = interval_json(r.schedule.pre);
    e["attack"] = interval_json(r.schedule.attack);
    e["post"] = interval_json(r.schedule.post);
    auto& ws = e["windows"] = ordered_json::array();
    for (const auto& w : r.windows) ws.push_back(interval_json(w));
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::vector<LabeledRun> schedules_from_json(std::string_view text) {
  const auto j = parse_doc(text, "schedules");
  if (!j.is_object() || !j.contains("version")) throw Error(ErrorCategory::Parse, "schedules: missing version");
  if (j["version"] != kScheduleFormatVersion)
    throw Error(ErrorCategory::Version, "schedules: unsupported version " + j["version"].dump());
  try {
    std::vector<LabeledRun> out;
    for (const auto& e : j.at("runs")) {
      LabeledRun r;
      r.run.run_id = e.at("run_id").get<std::string>();
      r.fault_model = e.at("fault_model").get<std::string>();
      r.schedule = Schedule{interval_from(e.at("pre")), interval_from(e.at("attack")),
                            interval_from(e.at("post"))};
      if (r.schedule.pre.end != r.schedule.attack.begin || r.schedule.attack.end != r.schedule.post.begin)
        throw Error(ErrorCategory::Parse, "schedules: intervals of " + r.run.run_id + " are not contiguous");
      for (const auto& w : e.at("windows")) r.windows.push_back(interval_from(w));
      out.push_back(std::move(r));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("schedules: ") + e.what());
  }
}

WorkloadSpec workload_from_json(std::string_view text) {
  const auto j = parse_doc(text, "workload");
  try {
    WorkloadSpec spec;
    spec.sample_interval = j.value("sample_interval", 1.0);
    for (const auto& k : j.at("keys"))
      spec.keys.push_back(
          {k.at("group").get<std::string>(), k.at("transaction").get<std::string>(), k.value("scale", 1.0)});
    for (const auto& p : j.at("phases")) {
      PhaseSpec ph;
      ph.id = p.at("id").get<std::string>();
      ph.duration = p.value("duration", ph.duration);
      ph.mean = p.value("mean", ph.mean);
      ph.sigma = p.value("sigma", ph.sigma);
      spec.phases.push_back(ph);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("workload: ") + e.what());
  }
}

std::string workload_to_json(const WorkloadSpec& spec) {
  ordered_json j;
  j["sample_interval"] = spec.sample_interval;
  auto& keys = j["keys"] = ordered_json::array();
  for (const auto& k : spec.keys)
    keys.push_back({{"group", k.group}, {"transaction", k.transaction}, {"scale", k.scale}});
  auto& phases = j["phases"] = ordered_json::array();
  for (const auto& p : spec.phases)
    phases.push_back({{"id", p.id}, {"duration", p.duration}, {"mean", p.mean}, {"sigma", p.sigma}});
  return j.dump(2) + "\n";
}

}  // namespace bucketwatch
