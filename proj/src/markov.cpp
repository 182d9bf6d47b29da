#include "bucketwatch/markov.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "bucketwatch/error.hpp"
#include "bucketwatch/rng.hpp"

namespace bucketwatch {

std::string_view to_string(AbsorptionMethod m) noexcept {
  switch (m) {
    case AbsorptionMethod::ClosedForm: return "closed_form";
    case AbsorptionMethod::ExactSolve: return "exact";
    case AbsorptionMethod::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

void WalkParams::validate() const {
  if (p.empty()) throw Error(ErrorCategory::InvalidArgument, "walk parameters need at least one bucket");
  for (double v : p)
    if (!(v > 0.0 && v < 1.0))
      throw Error(ErrorCategory::InvalidArgument,
                  "walk probability " + std::to_string(v) + " outside (0, 1)");
}

namespace {

void check_depth(int depth) {
  if (depth < 1) throw Error(ErrorCategory::InvalidArgument, "bucket depth must be >= 1");
}

void check_open_unit(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorCategory::InvalidArgument, "walk probability must lie in (0, 1)");
}

// The closed forms divide by (1 - rho); rho = 1 exactly at p = 1/2.
long double odds(double p) {
  check_open_unit(p);
  const long double rho = 1.0L / static_cast<long double>(p) - 1.0L;
  if (rho == 1.0L)
    throw Error(ErrorCategory::Singular,
                "closed form is singular at p = 1/2; use exact_absorption instead");
  return rho;
}

// Extended precision keeps rho^(+-D) finite well past the double range, so
// only a result that itself exceeds the double range turns into +inf.
long double passage(long double rho, int levels) {
  const long double Delta = (1.0L + rho) / (1.0L - rho);
  const long double delta = (1.0L - std::pow(rho, -static_cast<long double>(levels))) / (rho - 1.0L);
  return Delta * (delta - levels);
}

double to_double(long double v) {
  if (!std::isfinite(static_cast<double>(v))) return std::numeric_limits<double>::infinity();
  return static_cast<double>(v);
}

}  // namespace

ClosedFormTerms closed_form_terms(double p, int depth) {
  check_depth(depth);
  const long double rho = odds(p);
  return {static_cast<double>(rho), static_cast<double>((1.0L + rho) / (1.0L - rho)),
          to_double((1.0L - std::pow(rho, -static_cast<long double>(depth))) / (rho - 1.0L))};
}

double first_passage_single(double p, int levels) {
  if (levels < 0) throw Error(ErrorCategory::InvalidArgument, "levels must be >= 0");
  return to_double(passage(odds(p), levels));
}

double closed_form_a1(double p1, int depth) {
  check_depth(depth);
  return to_double(passage(odds(p1), depth + 1));
}

double closed_form_a2(double p1, double p2, int depth) {
  check_depth(depth);
  const long double rho1 = odds(p1);
  const long double rho2 = odds(p2);
  const long double D = depth;
  const long double Delta1 = (1.0L + rho1) / (1.0L - rho1);
  const long double Delta2 = (1.0L + rho2) / (1.0L - rho2);
  const long double delta1 = (1.0L - std::pow(rho1, -D)) / (rho1 - 1.0L);
  const long double delta2 = (1.0L - std::pow(rho2, -D)) / (rho2 - 1.0L);
  const long double rho1_up = std::pow(rho1, D + 1.0L);

  const long double first = Delta1 * (delta1 - D);
  const long double second = Delta2 * (delta2 - D) + Delta1 * ((1.0L - rho1_up) / rho1_up) * delta2;
  return to_double(first + second);
}

namespace {

// Position n = (b-1)(D+1) + d on the line of transient states.
double passage_sum(const WalkParams& p, int depth, long long from) {
  p.validate();
  check_depth(depth);
  const long long per_bucket = static_cast<long long>(depth) + 1;
  const long long total = per_bucket * p.buckets();
  // U_n: mean time to go from n to n+1.
  long double u = 0.0L;
  long double sum = 0.0L;
  for (long long n = 0; n < total; ++n) {
    const long double stay = p.p[static_cast<std::size_t>(n / per_bucket)];
    const long double up = 1.0L - stay;
    u = n == 0 ? 1.0L / up : (1.0L + stay * u) / up;
    if (n >= from) sum += u;
  }
  return to_double(sum);
}

}  // namespace

double exact_absorption(const WalkParams& p, int depth) { return passage_sum(p, depth, 0); }

double exact_absorption_from(const WalkParams& p, int depth, const DetectorState& start) {
  check_depth(depth);
  if (start.alarmed || start.bucket < 1 || start.bucket > p.buckets() || start.depth < 0 ||
      start.depth > depth)
    throw Error(ErrorCategory::InvalidArgument, "start state outside the transient chain");
  const long long from =
      static_cast<long long>(start.bucket - 1) * (depth + 1) + static_cast<long long>(start.depth);
  return passage_sum(p, depth, from);
}

namespace {

constexpr int kLanes = 256;
constexpr std::uint64_t kIdle = ~std::uint64_t{0};

// Add thresholds indexed by bucket (slot 0 unused).
std::vector<std::uint64_t> add_thresholds(const WalkParams& p) {
  std::vector<std::uint64_t> thr(p.p.size() + 1, 0);
  for (std::size_t i = 0; i < p.p.size(); ++i) thr[i + 1] = probability_threshold32(1.0 - p.p[i]);
  return thr;
}

struct alignas(64) Lanes {
  std::int64_t bucket[kLanes];
  std::int64_t depth[kLanes];
  std::int64_t done[kLanes];  // 1 once absorbed (or idle)
  std::uint64_t rng[kLanes];  // key + steps * gamma
  std::uint64_t steps[kLanes];
  std::uint64_t trial[kLanes];
};

// Bucket counts up to this size look their threshold up with a select
// chain, which vectorizes without gather instructions.
constexpr int kSelectBuckets = 8;

// Select > 0: compile-time bucket count, thresholds picked by a mask chain.
// Select == 0: indexed load.
template <int Select>
inline std::uint64_t lane_threshold(const std::uint64_t* thr, std::int64_t bucket) noexcept {
  if constexpr (Select > 0) {
    std::uint64_t t = 0;
#pragma GCC unroll 8
    for (int j = 1; j <= Select; ++j) t |= thr[j] & (std::uint64_t{0} - (bucket == j));
    return t;
  } else {
    return thr[bucket];
  }
}

// Runs trials [first, last) and writes their absorption times. Lanes are
// refilled with the next trial as soon as they absorb.
template <int Select>
void run_block(const std::uint64_t* thr_in, std::int64_t buckets, std::int64_t max_depth,
               std::uint64_t first, std::uint64_t last, std::uint64_t seed, std::uint64_t max_steps,
               std::uint64_t* out, std::atomic<bool>& overrun) {
  Lanes lanes;
  std::uint64_t thr[kSelectBuckets + 1] = {};
  if constexpr (Select > 0)
    std::copy(thr_in, thr_in + buckets + 1, thr);
  std::uint64_t next = first;
  auto load = [&](int i) {
    lanes.bucket[i] = 1;
    lanes.depth[i] = 0;
    lanes.steps[i] = 0;
    if (next < last) {
      lanes.trial[i] = next;
      lanes.rng[i] = CounterRng::split(seed, next).key();
      lanes.done[i] = 0;
      ++next;
    } else {
      lanes.trial[i] = kIdle;
      lanes.rng[i] = 0;
      lanes.done[i] = 1;
    }
  };
  int active = 0;
  for (int i = 0; i < kLanes; ++i) {
    load(i);
    active += lanes.done[i] == 0;
  }

  std::uint64_t finished = 0;
  std::uint64_t finished_steps = 0;
  while (active > 0) {
    // Frozen lanes waste at most `chunk` steps per trial; size the chunk from
    // the observed mean so short walks stay cheap.
    const std::uint64_t mean = finished ? finished_steps / finished : 16;
    const int chunk = static_cast<int>(std::clamp<std::uint64_t>(mean / 4, 1, 64));
    for (int k = 0; k < chunk; ++k) {
#pragma omp simd
      for (int i = 0; i < kLanes; ++i) {
        const std::uint64_t live = static_cast<std::uint64_t>(lanes.done[i]) - 1;  // ~0 if running
        lanes.rng[i] += kGoldenGamma & live;
        const std::uint64_t u = mix64(lanes.rng[i]) >> 32;
        const std::int64_t add =
            u < lane_threshold<Select>(Select > 0 ? thr : thr_in, lanes.bucket[i]);
        const auto t = advance_bucket<std::int64_t>(lanes.bucket[i], lanes.depth[i], add, buckets,
                                                    max_depth);
        const auto mask = static_cast<std::int64_t>(live);
        lanes.bucket[i] = (t.bucket & mask) | (lanes.bucket[i] & ~mask);
        lanes.depth[i] = (t.depth & mask) | (lanes.depth[i] & ~mask);
        lanes.steps[i] += 1 & live;
        lanes.done[i] |= t.alarm;
      }
    }
    for (int i = 0; i < kLanes; ++i) {
      if (lanes.trial[i] == kIdle) continue;
      if (max_steps != 0 && lanes.steps[i] > max_steps) {
        overrun.store(true, std::memory_order_relaxed);
        return;
      }
      if (lanes.done[i]) {
        out[lanes.trial[i] - first] = lanes.steps[i];
        ++finished;
        finished_steps += lanes.steps[i];
        load(i);
        if (lanes.done[i]) --active;
      }
    }
    if (overrun.load(std::memory_order_relaxed)) return;
  }
}

template <int... Bs>
void dispatch_block_impl(std::integer_sequence<int, Bs...>, const std::uint64_t* thr, std::int64_t buckets,
                         std::int64_t max_depth, std::uint64_t first, std::uint64_t last, std::uint64_t seed,
                         std::uint64_t max_steps, std::uint64_t* out, std::atomic<bool>& overrun) {
  const bool hit = ((buckets == Bs + 1 &&
                     (run_block<Bs + 1>(thr, buckets, max_depth, first, last, seed, max_steps, out, overrun), true)) ||
                    ...);
  if (!hit) run_block<0>(thr, buckets, max_depth, first, last, seed, max_steps, out, overrun);
}

void dispatch_block(const std::uint64_t* thr, std::int64_t buckets, std::int64_t max_depth, std::uint64_t first,
                    std::uint64_t last, std::uint64_t seed, std::uint64_t max_steps, std::uint64_t* out,
                    std::atomic<bool>& overrun) {
  dispatch_block_impl(std::make_integer_sequence<int, kSelectBuckets>{}, thr, buckets, max_depth, first, last, seed,
                      max_steps, out, overrun);
}

void check_simulation_args(const WalkParams& p, int depth, std::uint64_t trials) {
  p.validate();
  check_depth(depth);
  if (trials < 1) throw Error(ErrorCategory::InvalidArgument, "need at least one trial");
}

[[noreturn]] void throw_overrun(std::uint64_t max_steps) {
  throw Error(ErrorCategory::InvalidArgument,
              "trial exceeded " + std::to_string(max_steps) + " samples without absorbing");
}

}  // namespace

std::vector<std::uint64_t> absorption_times(const WalkParams& p, int depth, std::uint64_t trials,
                                            std::uint64_t seed, const SimulationOptions& opt) {
  check_simulation_args(p, depth, trials);
  const auto thr = add_thresholds(p);
  std::vector<std::uint64_t> times(trials, 0);

  const auto threads = static_cast<std::uint64_t>(std::max(1, omp_get_max_threads()));
  const std::uint64_t block =
      std::max<std::uint64_t>(kLanes * 64, (trials + 4 * threads - 1) / (4 * threads));
  const auto blocks = static_cast<std::int64_t>((trials + block - 1) / block);
  std::atomic<bool> overrun{false};

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < blocks; ++k) {
    const std::uint64_t first = static_cast<std::uint64_t>(k) * block;
    const std::uint64_t last = std::min(trials, first + block);
    dispatch_block(thr.data(), p.buckets(), depth, first, last, seed, opt.max_steps,
                   times.data() + first, overrun);
  }
  if (overrun) throw_overrun(opt.max_steps);
  return times;
}

std::vector<std::uint64_t> absorption_times_serial(const WalkParams& p, int depth,
                                                   std::uint64_t trials, std::uint64_t seed,
                                                   const SimulationOptions& opt) {
  check_simulation_args(p, depth, trials);
  const auto thr = add_thresholds(p);

  // Synthetic stream against a unit baseline: `below` is under every
  // threshold (adds a ball in any bucket), `above` is over every one.
  const DetectorConfig cfg{p.buckets(), depth, Direction::LowerIsAnomalous};
  const BaselineStats baseline{0.0, 1.0, 2};
  const double below = -static_cast<double>(p.buckets()) - 1.0;
  const double above = 1.0;

  std::vector<std::uint64_t> times(trials, 0);
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const CounterRng rng = CounterRng::split(seed, trial);
    DetectorState state = detector_reset(cfg);
    for (std::uint64_t n = 0;; ++n) {
      if (opt.max_steps != 0 && n >= opt.max_steps) throw_overrun(opt.max_steps);
      const double value = rng.bits32(n) < thr[static_cast<std::size_t>(state.bucket)] ? below : above;
      const StepResult r = detector_step(state, value, baseline, cfg);
      if (r.alarm) {
        times[trial] = n + 1;
        break;
      }
      state = r.state;
    }
  }
  return times;
}

AbsorptionEstimate summarize_times(std::span<const std::uint64_t> times) {
  if (times.empty()) throw Error(ErrorCategory::InvalidArgument, "no trials to summarize");
  long double sum = 0.0L;
  for (auto t : times) sum += static_cast<long double>(t);
  const long double n = static_cast<long double>(times.size());
  const long double mean = sum / n;
  long double ss = 0.0L;
  for (auto t : times) {
    const long double dev = static_cast<long double>(t) - mean;
    ss += dev * dev;
  }
  const double stderr_ = times.size() > 1 ? static_cast<double>(std::sqrt(ss / (n - 1.0L) / n)) : 0.0;
  return {static_cast<double>(mean), AbsorptionMethod::MonteCarlo, stderr_};
}

AbsorptionEstimate simulate_absorption(const WalkParams& p, int depth, std::uint64_t trials,
                                       std::uint64_t seed, const SimulationOptions& opt) {
  const auto times = absorption_times(p, depth, trials, seed, opt);
  return summarize_times(times);
}

AbsorptionEstimate simulate_absorption_serial(const WalkParams& p, int depth, std::uint64_t trials,
                                              std::uint64_t seed, const SimulationOptions& opt) {
  const auto times = absorption_times_serial(p, depth, trials, seed, opt);
  return summarize_times(times);
}

WalkParams estimate_walk_params(std::span<const double> values, const BaselineStats& baseline,
                                int buckets, Direction direction, std::size_t min_samples) {
  baseline.validate();
  if (buckets < 1) throw Error(ErrorCategory::InvalidArgument, "bucket count must be >= 1");
  if (values.size() < std::max<std::size_t>(min_samples, 1))
    throw Error(ErrorCategory::InvalidArgument,
                "need at least " + std::to_string(min_samples) + " samples to estimate walk "
                "parameters, got " + std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCategory::InvalidArgument, "sample value must be finite");

  WalkParams out;
  out.p.reserve(static_cast<std::size_t>(buckets));
  for (int b = 1; b <= buckets; ++b) {
    const auto calm = std::count_if(values.begin(), values.end(), [&](double v) {
      return !is_anomalous(v, baseline.mu, baseline.sigma, b, direction);
    });
    const double frac = static_cast<double>(calm) / static_cast<double>(values.size());
    out.p.push_back(std::clamp(frac, kWalkClampLow, kWalkClampHigh));
  }
  return out;
}

}  // namespace bucketwatch
