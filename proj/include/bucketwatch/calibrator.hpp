#pragma once

// Choosing the bucket depth D for a fixed bucket count B.
//
// With anomalies arriving as a Poisson process of rate alpha (per sample),
// the probability that the detector raises a false alarm before the next
// anomaly is modelled from the mean absorption time A_B(D):
//   deterministic time to alarm:  f = exp(-A alpha)
//   exponential time to alarm:    f = 1 / (1 + A alpha)
// The hard problem takes the smallest D with f <= F; the soft problem
// minimises the cost B D + w f.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bucketwatch/markov.hpp"

namespace bucketwatch {

enum class FalseAlarmModel { Deterministic, Exponential };

std::string_view to_string(FalseAlarmModel m) noexcept;
FalseAlarmModel false_alarm_model_from_string(std::string_view s);

// Which mean-absorption route feeds the calibration.
//   Auto       closed form for B <= 2 when every |rho_i - 1| >= 1e-4, the
//              exact chain otherwise
//   ClosedForm closed_form_a1 / closed_form_a2 (B <= 2 only)
//   Exact      exact_absorption
enum class AbsorptionSource { Auto, ClosedForm, Exact };

std::string_view to_string(AbsorptionSource s) noexcept;
AbsorptionSource absorption_source_from_string(std::string_view s);

struct DepthRange {
  int min = 1;
  int max = 64;

  void validate() const;
};

// Mean samples to a false alarm via the chosen route.
AbsorptionEstimate mean_absorption(const WalkParams& p, int depth,
                                   AbsorptionSource source = AbsorptionSource::Auto);

double false_alarm_prob(double mean_absorption, double alpha, FalseAlarmModel model);

double cost(const WalkParams& p, double w, int depth, double alpha, FalseAlarmModel model,
            AbsorptionSource source = AbsorptionSource::Auto);

std::optional<int> min_depth_hard(const WalkParams& p, double alpha, double target_f,
                                  FalseAlarmModel model, DepthRange range = {},
                                  AbsorptionSource source = AbsorptionSource::Auto);

// Ties go to the smaller depth.
int optimal_depth_soft(const WalkParams& p, double w, double alpha, FalseAlarmModel model,
                       DepthRange range = {}, AbsorptionSource source = AbsorptionSource::Auto);

// Weight w under which the soft problem picks the hard problem's depth D*.
// Starts from the stationarity estimate w = -B / f'(D*), f' the central
// difference (one-sided at the range ends). If that weight does not select
// D*, the geometric midpoint of the interval of weights that do is used.
// Throws Error(Infeasible) if the hard problem has no solution or D* is not
// a soft optimum for any weight.
double infer_weight(const WalkParams& p, double alpha, double target_f, FalseAlarmModel model,
                    DepthRange range = {}, AbsorptionSource source = AbsorptionSource::Auto);

struct CalibrationQuery {
  double alpha = 2e-6;
  double target_f = 0.03;
  double w = 909.0;
  FalseAlarmModel model = FalseAlarmModel::Exponential;
  DepthRange range;
  AbsorptionSource source = AbsorptionSource::Auto;

  void validate() const;
};

struct CalibrationRow {
  int depth = 0;
  double mean_absorption = 0.0;
  double f_det = 0.0;
  double f_exp = 0.0;
  double cost_det = 0.0;
  double cost_exp = 0.0;
};

struct CalibrationReport {
  int buckets = 0;
  CalibrationQuery query;
  std::vector<CalibrationRow> rows;  // sorted by depth
  std::optional<int> chosen_hard;
  int chosen_soft = 0;

  // L = B D at the chosen depth (hard if feasible, soft otherwise).
  int lower_bound_samples() const noexcept;
};

// Rows are evaluated in parallel; calibrate_serial is the reference.
CalibrationReport calibrate(const WalkParams& p, const CalibrationQuery& query);
CalibrationReport calibrate_serial(const WalkParams& p, const CalibrationQuery& query);

// Columns: D,A,f_det,f_exp,cost_det,cost_exp
std::string report_to_csv(const CalibrationReport& report);
std::string report_to_json(const CalibrationReport& report);

}  // namespace bucketwatch
