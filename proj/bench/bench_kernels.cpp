#include <benchmark/benchmark.h>

#include "bucketwatch/calibrator.hpp"
#include "bucketwatch/config.hpp"
#include "bucketwatch/detector.hpp"
#include "bucketwatch/markov.hpp"
#include "bucketwatch/profiler.hpp"
#include "bucketwatch/workload.hpp"

using namespace bucketwatch;

namespace {

const WalkParams kRef{{0.46, 0.71}};

void BM_AbsorptionParallel(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  std::uint64_t steps = 0;
  for (auto _ : state) {
    const auto t = absorption_times(kRef, depth, 20000, 3);
    for (auto x : t) steps += x;
    benchmark::DoNotOptimize(t.data());
  }
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}

void BM_AbsorptionSerial(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  std::uint64_t steps = 0;
  for (auto _ : state) {
    const auto t = absorption_times_serial(kRef, depth, 20000, 3);
    for (auto x : t) steps += x;
    benchmark::DoNotOptimize(t.data());
  }
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}

struct DetectorFixture {
  RunSet runs;
  BaselineProfile profile;
  MonitorConfig cfg;
  std::vector<Sample> flat;

  DetectorFixture() {
    std::vector<KeySpec> keys;
    for (int g = 1; g <= 4; ++g)
      for (int t = 1; t <= 9; ++t) keys.push_back({"G" + std::to_string(g), "TX" + std::to_string(t), 1.0});
    const auto spec = default_workload(keys);
    runs = generate_golden(spec, 1, 5);
    profile = compute_baseline(runs);
    cfg.detector = {2, 4, Direction::LowerIsAnomalous};
    flat = runs.runs[0].samples;
  }
};

const DetectorFixture& detector_fixture() {
  static const DetectorFixture f;
  return f;
}

void BM_DetectorParallel(benchmark::State& state) {
  const auto& f = detector_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(run_detector(f.flat, f.profile, f.cfg, "r"));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.flat.size()));
}

void BM_DetectorSerial(benchmark::State& state) {
  const auto& f = detector_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(run_detector_serial(f.flat, f.profile, f.cfg, "r"));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.flat.size()));
}

void BM_CalibrateParallel(benchmark::State& state) {
  CalibrationQuery q;
  q.source = AbsorptionSource::Exact;
  q.range = {1, static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(calibrate(kRef, q));
}

void BM_CalibrateSerial(benchmark::State& state) {
  CalibrationQuery q;
  q.source = AbsorptionSource::Exact;
  q.range = {1, static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_serial(kRef, q));
}

}  // namespace

BENCHMARK(BM_AbsorptionParallel)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AbsorptionSerial)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectorParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectorSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CalibrateParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_CalibrateSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
