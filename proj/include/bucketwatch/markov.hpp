#pragma once

// Mean time to a false alarm of the bucket detector, modelled as a
// discrete-time birth-death chain over the detector states (b, d).
//
// Convention: p[i] is the probability that a sample does NOT add a ball
// while the detector sits in bucket i+1, and rho_i = 1/p_i - 1 is the odds
// of an add against a removal.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bucketwatch/detector.hpp"

namespace bucketwatch {

struct WalkParams {
  std::vector<double> p;

  int buckets() const noexcept { return static_cast<int>(p.size()); }

  // Throws Error(InvalidArgument) unless every p_i lies in (0, 1).
  void validate() const;

  bool operator==(const WalkParams&) const = default;
};

enum class AbsorptionMethod { ClosedForm, ExactSolve, MonteCarlo };

std::string_view to_string(AbsorptionMethod m) noexcept;

struct AbsorptionEstimate {
  double mean = 0.0;
  AbsorptionMethod method = AbsorptionMethod::ExactSolve;
  double stderr_ = 0.0;  // Monte Carlo only
};

struct ClosedFormTerms {
  double rho;    // 1/p - 1
  double Delta;  // (1 + rho) / (1 - rho)
  double delta;  // (1 - rho^-D) / (rho - 1)
};

// Throws Error(Singular) at p = 1/2.
ClosedFormTerms closed_form_terms(double p, int depth);

// Mean number of samples for a single reflecting walk to climb from level 0
// to level `levels`. Throws Error(Singular) at p = 1/2.
double first_passage_single(double p, int levels);

// Mean time to alarm with one bucket of depth D. Overflow needs D+1 net
// additions, so this is the single-walk passage to level D+1.
double closed_form_a1(double p1, int depth);

// Published two-bucket expression
//   A2 = Delta1 (delta1 - D) + Delta2 (delta2 - D)
//        + Delta1 ((1 - rho1^(D+1)) / rho1^(D+1)) delta2.
// It is evaluated exactly as written. It does not coincide with
// exact_absorption(.., B = 2): see README, "Closed form vs. exact chain".
double closed_form_a2(double p1, double p2, int depth);

// Expected hitting time of the alarm from (b=1, d=0) on the chain the
// detector actually implements: B(D+1) transient states in a line, the
// walk reflecting at (1, 0). Solved by the backward first-passage
// recurrence, which involves only sums of positive terms.
double exact_absorption(const WalkParams& p, int depth);

// Same chain, started from an arbitrary (non-alarmed) detector state.
double exact_absorption_from(const WalkParams& p, int depth, const DetectorState& start);

struct SimulationOptions {
  // Abort a trial (Error(InvalidArgument)) after this many samples; 0 means
  // no limit.
  std::uint64_t max_steps = 0;
};

// Per-trial absorption times, trial i driven by CounterRng::split(seed, i).
// The parallel kernel steps many independent trials in SIMD lanes across
// OpenMP threads; the serial reference feeds synthetic samples one at a time
// through detector_step. Both return identical vectors.
std::vector<std::uint64_t> absorption_times(const WalkParams& p, int depth, std::uint64_t trials,
                                            std::uint64_t seed, const SimulationOptions& opt = {});
std::vector<std::uint64_t> absorption_times_serial(const WalkParams& p, int depth,
                                                   std::uint64_t trials, std::uint64_t seed,
                                                   const SimulationOptions& opt = {});

AbsorptionEstimate summarize_times(std::span<const std::uint64_t> times);

AbsorptionEstimate simulate_absorption(const WalkParams& p, int depth, std::uint64_t trials,
                                       std::uint64_t seed, const SimulationOptions& opt = {});
AbsorptionEstimate simulate_absorption_serial(const WalkParams& p, int depth, std::uint64_t trials,
                                              std::uint64_t seed,
                                              const SimulationOptions& opt = {});

inline constexpr double kWalkClampLow = 1e-6;
inline constexpr double kWalkClampHigh = 1.0 - 1e-6;

// p_i = fraction of values on the non-anomalous side of threshold i,
// clamped into [1e-6, 1 - 1e-6]. Throws Error(InvalidArgument) for fewer
// than `min_samples` values, a non-finite value, or an invalid baseline
// (a constant key already fails there with sigma = 0).
WalkParams estimate_walk_params(std::span<const double> values, const BaselineStats& baseline,
                                int buckets, Direction direction, std::size_t min_samples = 100);

}  // namespace bucketwatch
