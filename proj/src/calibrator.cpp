#include "bucketwatch/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "bucketwatch/error.hpp"
#include "bucketwatch/io.hpp"

namespace bucketwatch {

std::string_view to_string(FalseAlarmModel m) noexcept {
  return m == FalseAlarmModel::Deterministic ? "deterministic" : "exponential";
}

FalseAlarmModel false_alarm_model_from_string(std::string_view s) {
  if (s == "deterministic" || s == "det") return FalseAlarmModel::Deterministic;
  if (s == "exponential" || s == "exp") return FalseAlarmModel::Exponential;
  throw Error(ErrorCategory::InvalidArgument, "unknown false-alarm model '" + std::string(s) + "'");
}

std::string_view to_string(AbsorptionSource s) noexcept {
  switch (s) {
    case AbsorptionSource::Auto: return "auto";
    case AbsorptionSource::ClosedForm: return "closed_form";
    case AbsorptionSource::Exact: return "exact";
  }
  return "unknown";
}

AbsorptionSource absorption_source_from_string(std::string_view s) {
  if (s == "auto") return AbsorptionSource::Auto;
  if (s == "closed_form" || s == "closed-form") return AbsorptionSource::ClosedForm;
  if (s == "exact") return AbsorptionSource::Exact;
  throw Error(ErrorCategory::InvalidArgument, "unknown absorption source '" + std::string(s) + "'");
}

void DepthRange::validate() const {
  if (min < 1 || max < min)
    throw Error(ErrorCategory::InvalidArgument, "depth range must satisfy 1 <= min <= max");
}

namespace {

bool closed_form_usable(const WalkParams& p) {
  if (p.buckets() > 2) return false;
  return std::all_of(p.p.begin(), p.p.end(),
                     [](double v) { return std::abs((1.0 / v - 1.0) - 1.0) >= 1e-4; });
}

}  // namespace

AbsorptionEstimate mean_absorption(const WalkParams& p, int depth, AbsorptionSource source) {
  p.validate();
  if (source == AbsorptionSource::Auto)
    source = closed_form_usable(p) ? AbsorptionSource::ClosedForm : AbsorptionSource::Exact;
  if (source == AbsorptionSource::Exact)
    return {exact_absorption(p, depth), AbsorptionMethod::ExactSolve, 0.0};
  switch (p.buckets()) {
    case 1: return {closed_form_a1(p.p[0], depth), AbsorptionMethod::ClosedForm, 0.0};
    case 2: return {closed_form_a2(p.p[0], p.p[1], depth), AbsorptionMethod::ClosedForm, 0.0};
    default:
      throw Error(ErrorCategory::InvalidArgument, "closed form only available for B <= 2");
  }
}

double false_alarm_prob(double mean_absorption, double alpha, FalseAlarmModel model) {
  if (!(mean_absorption > 0.0))
    throw Error(ErrorCategory::InvalidArgument, "mean absorption time must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCategory::InvalidArgument, "anomaly rate must be finite and >= 0");
  if (alpha == 0.0) return 1.0;
  const double x = mean_absorption * alpha;
  const double f_exp = 1.0 / (1.0 + x);
  // exp(-x) <= 1/(1+x) holds exactly; keep it under rounding too
  return model == FalseAlarmModel::Deterministic ? std::min(std::exp(-x), f_exp) : f_exp;
}

double cost(const WalkParams& p, double w, int depth, double alpha, FalseAlarmModel model,
            AbsorptionSource source) {
  if (!(w >= 0.0)) throw Error(ErrorCategory::InvalidArgument, "weight must be >= 0");
  const double f = false_alarm_prob(mean_absorption(p, depth, source).mean, alpha, model);
  return static_cast<double>(p.buckets()) * depth + w * f;
}

std::optional<int> min_depth_hard(const WalkParams& p, double alpha, double target_f,
                                  FalseAlarmModel model, DepthRange range, AbsorptionSource source) {
  range.validate();
  for (int d = range.min; d <= range.max; ++d)
    if (false_alarm_prob(mean_absorption(p, d, source).mean, alpha, model) <= target_f) return d;
  return std::nullopt;
}

int optimal_depth_soft(const WalkParams& p, double w, double alpha, FalseAlarmModel model,
                       DepthRange range, AbsorptionSource source) {
  range.validate();
  int best = range.min;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int d = range.min; d <= range.max; ++d) {
    const double c = cost(p, w, d, alpha, model, source);
    if (c < best_cost) {
      best = d;
      best_cost = c;
    }
  }
  return best;
}

double infer_weight(const WalkParams& p, double alpha, double target_f, FalseAlarmModel model,
                    DepthRange range, AbsorptionSource source) {
  const auto hard = min_depth_hard(p, alpha, target_f, model, range, source);
  if (!hard)
    throw Error(ErrorCategory::Infeasible, "hard constraint infeasible over the depth range");
  const int target = *hard;
  const double B = p.buckets();
  auto f = [&](int d) { return false_alarm_prob(mean_absorption(p, d, source).mean, alpha, model); };

  const int lo = std::max(range.min, target - 1);
  const int hi = std::min(range.max, target + 1);
  if (lo == hi) return 0.0;  // single-point range: any weight selects it
  const double slope = (f(hi) - f(lo)) / (hi - lo);
  if (slope < 0.0) {
    const double w = -B / slope;
    if (optimal_depth_soft(p, w, alpha, model, range, source) == target) return w;
  }

  // D* wins under w iff B (D* - d) <= w (f(d) - f(D*)) for d < D* and
  // B (d - D*) >= w (f(D*) - f(d)) for d > D* (strictly, for ties to the left).
  const double f_star = f(target);
  double w_low = 0.0;
  double w_high = std::numeric_limits<double>::infinity();
  for (int d = range.min; d <= range.max; ++d) {
    if (d == target) continue;
    const double gap = f(d) - f_star;
    if (d < target) {
      if (!(gap > 0.0)) throw Error(ErrorCategory::Infeasible, "no weight selects the hard depth");
      w_low = std::max(w_low, B * (target - d) / gap);
    } else if (gap < 0.0) {
      w_high = std::min(w_high, B * (d - target) / -gap);
    }
  }
  if (!(w_low < w_high))
    throw Error(ErrorCategory::Infeasible, "no weight selects the hard depth");
  const double w = std::isinf(w_high) ? 2.0 * w_low : std::sqrt(w_low * w_high);
  if (optimal_depth_soft(p, w, alpha, model, range, source) != target)
    throw Error(ErrorCategory::Infeasible, "no weight selects the hard depth");
  return w;
}

void CalibrationQuery::validate() const {
  range.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCategory::InvalidArgument, "alpha must be finite and >= 0");
  if (!(target_f > 0.0 && target_f <= 1.0))
    throw Error(ErrorCategory::InvalidArgument, "target false-alarm probability must be in (0, 1]");
  if (!(w >= 0.0) || !std::isfinite(w))
    throw Error(ErrorCategory::InvalidArgument, "weight must be finite and >= 0");
}

int CalibrationReport::lower_bound_samples() const noexcept {
  return buckets * chosen_hard.value_or(chosen_soft);
}

namespace {

CalibrationRow make_row(const WalkParams& p, int depth, const CalibrationQuery& q) {
  CalibrationRow row;
  row.depth = depth;
  row.mean_absorption = mean_absorption(p, depth, q.source).mean;
  row.f_det = false_alarm_prob(row.mean_absorption, q.alpha, FalseAlarmModel::Deterministic);
  row.f_exp = false_alarm_prob(row.mean_absorption, q.alpha, FalseAlarmModel::Exponential);
  const double lag = static_cast<double>(p.buckets()) * depth;
  row.cost_det = lag + q.w * row.f_det;
  row.cost_exp = lag + q.w * row.f_exp;
  return row;
}

void choose(CalibrationReport& r) {
  const auto& q = r.query;
  const bool det = q.model == FalseAlarmModel::Deterministic;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows) {
    const double f = det ? row.f_det : row.f_exp;
    if (!r.chosen_hard && f <= q.target_f) r.chosen_hard = row.depth;
    const double c = det ? row.cost_det : row.cost_exp;
    if (c < best) {
      best = c;
      r.chosen_soft = row.depth;
    }
  }
}

}  // namespace

CalibrationReport calibrate(const WalkParams& p, const CalibrationQuery& query) {
  query.validate();
  p.validate();
  CalibrationReport r;
  r.buckets = p.buckets();
  r.query = query;
  const int n = query.range.max - query.range.min + 1;
  r.rows.resize(static_cast<std::size_t>(n));
  bool failed = false;
  Error first_error(ErrorCategory::InvalidArgument, "");

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      r.rows[static_cast<std::size_t>(i)] = make_row(p, query.range.min + i, query);
    } catch (const Error& e) {
#pragma omp critical(bucketwatch_calibrate_error)
      if (!failed) {
        failed = true;
        first_error = e;
      }
    }
  }
  if (failed) throw first_error;
  choose(r);
  return r;
}

CalibrationReport calibrate_serial(const WalkParams& p, const CalibrationQuery& query) {
  query.validate();
  p.validate();
  CalibrationReport r;
  r.buckets = p.buckets();
  r.query = query;
  for (int d = query.range.min; d <= query.range.max; ++d) r.rows.push_back(make_row(p, d, query));
  choose(r);
  return r;
}

std::string report_to_csv(const CalibrationReport& report) {
  std::string out = "D,A,f_det,f_exp,cost_det,cost_exp\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.depth);
    for (double v : {row.mean_absorption, row.f_det, row.f_exp, row.cost_det, row.cost_exp}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string report_to_json(const CalibrationReport& report) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["B"] = report.buckets;
  j["alpha"] = report.query.alpha;
  j["F"] = report.query.target_f;
  j["w"] = report.query.w;
  j["model"] = to_string(report.query.model);
  j["absorption_source"] = to_string(report.query.source);
  j["d_range"] = {report.query.range.min, report.query.range.max};
  j["chosen_hard"] = report.chosen_hard ? nlohmann::ordered_json(*report.chosen_hard) : nullptr;
  j["chosen_soft"] = report.chosen_soft;
  j["lower_bound_L"] = report.lower_bound_samples();
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows)
    rows.push_back({{"D", row.depth},
                    {"A", row.mean_absorption},
                    {"f_det", row.f_det},
                    {"f_exp", row.f_exp},
                    {"cost_det", row.cost_det},
                    {"cost_exp", row.cost_exp}});
  return j.dump(2) + "\n";
}

}  // namespace bucketwatch
