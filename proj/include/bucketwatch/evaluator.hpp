#pragma once

// Alert classification over labelled runs.
//
// Per faulted run: TP = 1 if any alert falls in the attack interval, else
// FN = 1. Every pre-attack alert is an FP. Post-attack alerts inside the
// residual window (t0, t0 + c delta] after attack end t0 are counted as
// residual; later ones are FPs. Golden runs contribute FPs only.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bucketwatch/detector.hpp"
#include "bucketwatch/workload.hpp"

namespace bucketwatch {

struct ClassifiedCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t residual = 0;

  ClassifiedCounts& operator+=(const ClassifiedCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    residual += o.residual;
    return *this;
  }
  bool operator==(const ClassifiedCounts&) const = default;
};

// Undefined components (zero denominators) are empty.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

Metrics metrics(const ClassifiedCounts& c);

struct ResidualPolicy {
  double delta = 0.0;  // seconds
  double c = 3.0;

  void validate() const;
  double window() const noexcept { return c * delta; }
};

// Mean over runs of (first attack-phase alert - attack start). Runs without
// an attack-phase alert are skipped. Alerts are matched to runs by run_id.
// Throws Error(InvalidArgument) if no run has an attack-phase alert.
double mean_time_to_first_alarm(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts);

struct ResidualSplit {
  std::vector<AlertEvent> kept;
  std::size_t residual = 0;
};

// Drops alerts with attack_end <= t <= attack_end + c delta. An empty window
// (c delta = 0) drops nothing. Alerts must be time-ordered.
ResidualSplit residual_filter(std::span<const AlertEvent> alerts, double attack_end,
                              const ResidualPolicy& policy);

// Counts for one run from its residual-filtered alerts. Throws
// Error(InvalidArgument) for an alert outside every schedule interval.
ClassifiedCounts classify_run(const LabeledRun& run, std::span<const AlertEvent> kept,
                              std::size_t residual = 0);

// Filters and classifies every run. Alerts must belong to one of the runs.
ClassifiedCounts classify(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts,
                          const ResidualPolicy& policy);

struct EvaluationRow {
  std::string fault_model;
  int buckets = 0;
  int depth = 0;
  ClassifiedCounts counts;
  Metrics metrics;
};

struct EvaluationReport {
  ResidualPolicy policy;
  std::vector<EvaluationRow> rows;  // one per fault model, then "all"
};

// Rows per fault model in first-appearance order plus a final "all" row.
EvaluationReport evaluate(std::span<const LabeledRun> runs, std::span<const AlertEvent> alerts,
                          const ResidualPolicy& policy, int buckets, int depth);

// Columns: fault_model,B,D,tp,fp,fn,residual,precision,recall,f1 (NA when
// undefined).
std::string evaluation_to_csv(const EvaluationReport& report);
std::string evaluation_to_json(const EvaluationReport& report);

std::string alerts_to_json(std::span<const AlertEvent> alerts);
std::vector<AlertEvent> alerts_from_json(std::string_view text);

}  // namespace bucketwatch
