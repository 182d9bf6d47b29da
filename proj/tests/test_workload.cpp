#include <doctest.h>

#include <cmath>
#include <cstring>

#include "bucketwatch/error.hpp"
#include "bucketwatch/markov.hpp"
#include "bucketwatch/profiler.hpp"
#include "bucketwatch/workload.hpp"

using namespace bucketwatch;

namespace {

WorkloadSpec small_spec() {
  WorkloadSpec s;
  s.keys = {{"G1", "TL", 1.0}, {"G2", "TO", 2.0}};
  s.phases = {{"1", 120.0, 100.0, 10.0}, {"4", 720.0, 80.0, 8.0}, {"6", 400.0, 60.0, 5.0}};
  return s;
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

bool same_bits(const Run& a, const Run& b) {
  if (a.run_id != b.run_id || a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i].key != b.samples[i].key || a.samples[i].t != b.samples[i].t ||
        std::memcmp(&a.samples[i].value, &b.samples[i].value, sizeof(double)) != 0)
      return false;
  return true;
}

}  // namespace

TEST_CASE("golden generation shape and determinism") {
  const auto spec = small_spec();
  CHECK(generate_golden(spec, 0, 1).runs.empty());
  const auto a = generate_golden(spec, 3, 42);
  const auto b = generate_golden(spec, 3, 42);
  const auto c = generate_golden(spec, 3, 43);
  REQUIRE(a.runs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same_bits(a.runs[i], b.runs[i]));
  CHECK_FALSE(same_bits(a.runs[0], c.runs[0]));
  CHECK(a.runs[0].run_id == "golden-0000");
  CHECK(a.runs[0].samples.size() == spec.samples_per_key() * spec.keys.size());
  CHECK(spec.samples_per_key() == 1240);
  for (const auto& s : a.runs[1].samples) {
    CHECK(s.value >= 0.0);
    CHECK(s.t >= 0.0);
    CHECK(s.t < spec.total_duration());
  }
  // time ordered, so the loader keeps the order
  for (std::size_t i = 1; i < a.runs[0].samples.size(); ++i)
    CHECK(a.runs[0].samples[i - 1].t <= a.runs[0].samples[i].t);
}

TEST_CASE("golden samples follow the phase distribution") {
  WorkloadSpec spec;
  spec.keys = {{"G", "T", 1.0}};
  spec.phases = {{"1", 100000.0, 100.0, 10.0}};
  const auto rs = generate_golden(spec, 1, 5);
  const auto prof = compute_baseline(rs);
  const auto st = *prof.find({"G", "T", "1"});
  CHECK(std::abs(st.mu - 100.0) < 0.2);
  CHECK(std::abs(st.sigma - 10.0) < 0.2);
  std::vector<double> values;
  for (const auto& s : rs.runs[0].samples) values.push_back(s.value);
  const auto w = estimate_walk_params(values, st, 2, Direction::LowerIsAnomalous);
  CHECK(std::abs(w.p[0] - phi(0.0)) < 0.01);
  CHECK(std::abs(w.p[1] - phi(1.0)) < 0.01);
}

TEST_CASE("key scale multiplies mean and sigma") {
  const auto spec = small_spec();
  const auto rs = generate_golden(spec, 4, 8);
  const auto prof = compute_baseline(rs);
  CHECK(prof.find({"G2", "TO", "4"})->mu == doctest::Approx(160.0).epsilon(0.02));
  CHECK(prof.find({"G2", "TO", "4"})->sigma == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("fault windows") {
  FaultSpec h{FaultPattern::H, "4", 0.6, 0.0};
  REQUIRE(h.windows().size() == 1);
  CHECK(h.windows()[0] == Interval{0.0, 300.0});
  FaultSpec l{FaultPattern::L, "4", 0.6, 0.0};
  const auto lw = l.windows();
  REQUIRE(lw.size() == 10);
  for (std::size_t i = 0; i < lw.size(); ++i) {
    CHECK(lw[i].length() == 15.0);
    if (i) CHECK(lw[i].begin - lw[i - 1].end == 15.0);
  }
  CHECK(l.span() == 300.0);
  FaultSpec ls{FaultPattern::Ls, "4", 0.6, 0.0};
  CHECK(ls.windows().size() == 3);
  CHECK(ls.span() == 90.0);
  CHECK(ls.model_name() == "4Ls");
  CHECK(fault_pattern_from_string("Ls") == FaultPattern::Ls);
  CHECK_THROWS_AS(fault_pattern_from_string("M"), Error);
}

TEST_CASE("inject_fault: only active windows change") {
  const auto spec = small_spec();
  const auto golden = generate_golden(spec, 1, 3).runs[0];
  for (auto pattern : {FaultPattern::H, FaultPattern::L, FaultPattern::Ls}) {
    const FaultSpec f{pattern, "4", 0.6, 100.0};
    const auto lr = inject_fault(golden, spec, f);
    CHECK(lr.fault_model == f.model_name());
    REQUIRE(lr.run.samples.size() == golden.samples.size());
    const double t1 = 120.0 + 100.0;
    CHECK(lr.schedule.pre == Interval{0.0, t1});
    CHECK(lr.schedule.attack == Interval{t1, t1 + f.span()});
    CHECK(lr.schedule.post == Interval{t1 + f.span(), spec.total_duration()});
    std::size_t changed_window = 0;
    for (std::size_t i = 0; i < golden.samples.size(); ++i) {
      const auto& g = golden.samples[i];
      const auto& x = lr.run.samples[i];
      bool active = false;
      for (const auto& w : lr.windows) active = active || w.contains(g.t);
      if (!active) {
        REQUIRE(std::memcmp(&g.value, &x.value, sizeof(double)) == 0);
      } else {
        const double scale = g.key.group == "G2" ? 2.0 : 1.0;
        CHECK(x.value == doctest::Approx(std::max(0.0, g.value - 0.4 * 80.0 * scale)));
        ++changed_window;
      }
    }
    const std::size_t active_seconds = pattern == FaultPattern::H ? 300 : pattern == FaultPattern::L ? 150 : 45;
    CHECK(changed_window == active_seconds * spec.keys.size());
  }
}

TEST_CASE("inject_fault: identity at degradation 1 and fit errors") {
  const auto spec = small_spec();
  const auto golden = generate_golden(spec, 1, 3).runs[0];
  const auto lr = inject_fault(golden, spec, FaultSpec{FaultPattern::H, "4", 1.0, 0.0});
  CHECK(same_bits(lr.run, golden));
  CHECK_THROWS_AS(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "4", 0.6, 421.0}), Error);
  CHECK_NOTHROW(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "4", 0.6, 420.0}));
  CHECK_THROWS_AS(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "1", 0.6, 0.0}), Error);
  CHECK_THROWS_AS(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "9", 0.6, 0.0}), Error);
  CHECK_THROWS_AS(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "4", 0.0, 0.0}), Error);
  CHECK_THROWS_AS(inject_fault(golden, spec, FaultSpec{FaultPattern::H, "4", 1.2, 0.0}), Error);
}

TEST_CASE("schedules and workload round trip") {
  const auto spec = small_spec();
  const auto golden = generate_golden(spec, 2, 3);
  std::vector<LabeledRun> runs{inject_fault(golden.runs[0], spec, FaultSpec{FaultPattern::L, "6", 0.5, 10.0}),
                               label_golden(golden.runs[1], spec)};
  const auto back = schedules_from_json(schedules_to_json(runs));
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].run.run_id == runs[i].run.run_id);
    CHECK(back[i].schedule == runs[i].schedule);
    CHECK(back[i].fault_model == runs[i].fault_model);
    CHECK(back[i].windows == runs[i].windows);
  }
  CHECK_FALSE(back[1].schedule.has_attack());
  const auto ws = workload_from_json(workload_to_json(spec));
  CHECK(ws.phases.size() == 3);
  CHECK(ws.keys[1].scale == 2.0);
  CHECK_THROWS_AS(schedules_from_json("{\"version\": 7, \"runs\": []}"), Error);
}

TEST_CASE("workload validation") {
  auto s = small_spec();
  s.phases[0].sigma = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.phases[1].duration = -1.0;
  CHECK_THROWS_AS(generate_golden(s, 1, 1), Error);
  s = small_spec();
  s.phases[1].id = "1";
  CHECK_THROWS_AS(s.validate(), Error);
}
