#include "bucketwatch/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "bucketwatch/error.hpp"
#include "bucketwatch/io.hpp"

namespace bucketwatch {

using nlohmann::ordered_json;

Metrics metrics(const ClassifiedCounts& c) {
  Metrics m;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) m.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = tp / static_cast<double>(c.tp + c.fn);
  if (m.precision && m.recall) {
    const double s = *m.precision + *m.recall;
    m.f1 = s > 0.0 ? 2.0 * *m.precision * *m.recall / s : 0.0;
  }
  return m;
}

void ResidualPolicy::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw Error(ErrorCategory::InvalidArgument, "residual delta must be finite and >= 0");
  if (!(c >= 0.0) || !std::isfinite(c))
    throw Error(ErrorCategory::InvalidArgument, "residual multiplier c must be finite and >= 0");
}

namespace {

std::map<std::string, std::vector<AlertEvent>> alerts_by_run(std::span<const LabeledRun> runs,
                                                             std::span<const AlertEvent> alerts) {
  std::map<std::string, std::vector<AlertEvent>> out;
  for (const auto& r : runs)
    if (!out.try_emplace(r.run.run_id).second)
      throw Error(ErrorCategory::InvalidArgument, "duplicate run_id '" + r.run.run_id + "'");
  for (const auto& a : alerts) {
    auto it = out.find(a.run_id);
    if (it == out.end())
      throw Error(ErrorCategory::InvalidArgument, "alert for unknown run '" + a.run_id + "'");
    it->second.push_back(a);
  }
  for (auto& [id, list] : out)
    std::stable_sort(list.begin(), list.end(),
                     [](const AlertEvent& a, const AlertEvent& b) { return a.time < b.time; });
  return out;
}

}  // namespace

double mean_time_to_first_alarm(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts) {
  const auto grouped = alerts_by_run(runs, alerts);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : runs) {
    if (!r.schedule.has_attack()) continue;
    for (const auto& a : grouped.at(r.run.run_id))
      if (r.schedule.attack.contains(a.time)) {
        sum += a.time - r.schedule.attack.begin;
        ++n;
        break;
      }
  }
  if (n == 0) throw Error(ErrorCategory::InvalidArgument, "no attack-phase alarms to time");
  return sum / static_cast<double>(n);
}

ResidualSplit residual_filter(std::span<const AlertEvent> alerts, double attack_end,
                              const ResidualPolicy& policy) {
  policy.validate();
  const double window = policy.window();
  ResidualSplit out;
  for (const auto& a : alerts) {
    if (window > 0.0 && a.time >= attack_end && a.time <= attack_end + window)
      ++out.residual;
    else
      out.kept.push_back(a);
  }
  return out;
}

ClassifiedCounts classify_run(const LabeledRun& run, std::span<const AlertEvent> kept,
                              std::size_t residual) {
  const Schedule& s = run.schedule;
  ClassifiedCounts c;
  c.residual = residual;
  bool detected = false;
  for (const auto& a : kept) {
    if (s.pre.contains(a.time) || s.post.contains(a.time)) {
      ++c.fp;
    } else if (s.attack.contains(a.time)) {
      detected = true;
    } else {
      throw Error(ErrorCategory::InvalidArgument,
                  "alert at t=" + format_double(a.time) + " lies outside run " + run.run.run_id);
    }
  }
  if (s.has_attack()) (detected ? c.tp : c.fn) = 1;
  return c;
}

ClassifiedCounts classify(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts,
                          const ResidualPolicy& policy) {
  policy.validate();
  const auto grouped = alerts_by_run(runs, alerts);
  ClassifiedCounts total;
  for (const auto& r : runs) {
    const auto& list = grouped.at(r.run.run_id);
    if (r.schedule.has_attack()) {
      auto split = residual_filter(list, r.schedule.attack.end, policy);
      total += classify_run(r, split.kept, split.residual);
    } else {
      total += classify_run(r, list);
    }
  }
  return total;
}

EvaluationReport evaluate(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts,
                          const ResidualPolicy& policy, int buckets, int depth) {
  policy.validate();
  const auto grouped = alerts_by_run(runs, alerts);
  EvaluationReport report;
  report.policy = policy;
  std::map<std::string, std::size_t> row_of;
  ClassifiedCounts all;
  for (const auto& r : runs) {
    auto [it, inserted] = row_of.try_emplace(r.fault_model, report.rows.size());
    if (inserted) report.rows.push_back(EvaluationRow{r.fault_model, buckets, depth, {}, {}});
    const auto& list = grouped.at(r.run.run_id);
    ClassifiedCounts c;
    if (r.schedule.has_attack()) {
      auto split = residual_filter(list, r.schedule.attack.end, policy);
      c = classify_run(r, split.kept, split.residual);
    } else {
      c = classify_run(r, list);
    }
    report.rows[it->second].counts += c;
    all += c;
  }
  for (auto& row : report.rows) row.metrics = metrics(row.counts);
  report.rows.push_back(EvaluationRow{"all", buckets, depth, all, metrics(all)});
  return report;
}

namespace {

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

std::string evaluation_to_csv(const EvaluationReport& report) {
  std::string out = "fault_model,B,D,tp,fp,fn,residual,precision,recall,f1\n";
  for (const auto& r : report.rows) {
    out += r.fault_model + ',' + std::to_string(r.buckets) + ',' + std::to_string(r.depth) + ',' +
           std::to_string(r.counts.tp) + ',' + std::to_string(r.counts.fp) + ',' +
           std::to_string(r.counts.fn) + ',' + std::to_string(r.counts.residual) + ',' +
           opt_csv(r.metrics.precision) + ',' + opt_csv(r.metrics.recall) + ',' + opt_csv(r.metrics.f1) +
           '\n';
  }
  return out;
}

std::string evaluation_to_json(const EvaluationReport& report) {
  ordered_json j;
  j["version"] = 1;
  j["residual"] = {{"delta", report.policy.delta},
                   {"c", report.policy.c},
                   {"anchor", "attack_end"},
                   {"post_attack_beyond_window", "fp"}};
  auto& rows = j["rows"] = ordered_json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"fault_model", r.fault_model},
                    {"B", r.buckets},
                    {"D", r.depth},
                    {"tp", r.counts.tp},
                    {"fp", r.counts.fp},
                    {"fn", r.counts.fn},
                    {"residual", r.counts.residual},
                    {"precision", opt_json(r.metrics.precision)},
                    {"recall", opt_json(r.metrics.recall)},
                    {"f1", opt_json(r.metrics.f1)}});
  return j.dump(2) + "\n";
}

std::string alerts_to_json(std::span<const AlertEvent> alerts) {
  ordered_json j;
  j["version"] = 1;
  auto& arr = j["alerts"] = ordered_json::array();
  for (const auto& a : alerts)
    arr.push_back({{"run_id", a.run_id},
                   {"group", a.key.group},
                   {"transaction", a.key.transaction},
                   {"phase", a.key.phase},
                   {"sample_index", a.sample_index},
                   {"t", a.time}});
  return j.dump(2) + "\n";
}

std::vector<AlertEvent> alerts_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("alerts: ") + e.what());
  }
  if (!j.is_object() || !j.contains("version")) throw Error(ErrorCategory::Parse, "alerts: missing version");
  if (j["version"] != 1) throw Error(ErrorCategory::Version, "alerts: unsupported version " + j["version"].dump());
  try {
    std::vector<AlertEvent> out;
    for (const auto& e : j.at("alerts")) {
      AlertEvent a;
      a.run_id = e.at("run_id").get<std::string>();
      a.key = StreamKey{e.at("group").get<std::string>(), e.at("transaction").get<std::string>(),
                        e.at("phase").get<std::string>()};
      a.sample_index = e.at("sample_index").get<std::uint64_t>();
      a.time = e.at("t").get<double>();
      out.push_back(std::move(a));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::Parse, std::string("alerts: ") + e.what());
  }
}

}  // namespace bucketwatch
