#include <doctest.h>

#include <random>

#include "bucketwatch/detector.hpp"
#include "bucketwatch/error.hpp"
#include "bucketwatch/profile.hpp"

using namespace bucketwatch;

namespace {

// Literal transcription of the bucket rules, kept deliberately naive.
struct RefDetector {
  int B, D;
  int b = 1, d = 0;
  bool step(bool add) {
    if (add) d += 1; else d -= 1;
    if (d > D) {
      d = 0;
      b += 1;
    }
    if (d < 0 && b > 1) {
      d = D;
      b -= 1;
    }
    if (d < 0 && b == 1) d = 0;
    if (b > B) {
      b = 1;
      d = 0;
      return true;
    }
    return false;
  }
};

const BaselineStats kBase{100.0, 10.0, 50};

Sample at(const StreamKey& k, double t, double v) { return Sample{k, t, v}; }

}  // namespace

TEST_CASE("reset gives the initial state") {
  for (auto cfg : {DetectorConfig{2, 15, Direction::LowerIsAnomalous}, DetectorConfig{1, 1, Direction::HigherIsAnomalous}}) {
    const auto s = detector_reset(cfg);
    CHECK(s.bucket == 1);
    CHECK(s.depth == 0);
    CHECK_FALSE(s.alarmed);
  }
}

TEST_CASE("B=1 D=1 alarms on the second anomalous sample") {
  const DetectorConfig cfg{1, 1, Direction::LowerIsAnomalous};
  auto r1 = detector_step(detector_reset(cfg), 50.0, kBase, cfg);
  CHECK_FALSE(r1.alarm);
  CHECK(r1.state.bucket == 1);
  CHECK(r1.state.depth == 1);
  auto r2 = detector_step(r1.state, 50.0, kBase, cfg);
  CHECK(r2.alarm);
  CHECK(r2.state.alarmed);
  CHECK(r2.state.bucket == 1);
  CHECK(r2.state.depth == 1);
}

TEST_CASE("minimal fill is B(D+1) samples") {
  for (auto [B, D] : {std::pair{2, 2}, std::pair{1, 1}, std::pair{2, 15}, std::pair{3, 4}, std::pair{5, 1}}) {
    const DetectorConfig cfg{B, D, Direction::LowerIsAnomalous};
    auto s = detector_reset(cfg);
    int n = 0;
    for (;;) {
      ++n;
      // far below every threshold
      auto r = detector_step(s, -1e6, kBase, cfg);
      if (r.alarm) break;
      s = r.state;
      REQUIRE(n < 10000);
    }
    CHECK(n == B * (D + 1));
    CHECK(n >= B * D);
  }
}

TEST_CASE("clean stream never moves the state") {
  const DetectorConfig cfg{2, 15, Direction::LowerIsAnomalous};
  auto s = detector_reset(cfg);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> above(100.0, 500.0);
  for (int i = 0; i < 5000; ++i) {
    auto r = detector_step(s, above(gen), kBase, cfg);
    CHECK_FALSE(r.alarm);
    s = r.state;
    REQUIRE(s.bucket == 1);
    REQUIRE(s.depth == 0);
  }
}

TEST_CASE("threshold boundaries: equality is not anomalous") {
  // bucket 1 compares against mu, bucket 2 against mu - sigma
  CHECK_FALSE(is_anomalous(100.0, 100.0, 10.0, 1, Direction::LowerIsAnomalous));
  CHECK(is_anomalous(99.999, 100.0, 10.0, 1, Direction::LowerIsAnomalous));
  CHECK_FALSE(is_anomalous(90.0, 100.0, 10.0, 2, Direction::LowerIsAnomalous));
  CHECK(is_anomalous(89.0, 100.0, 10.0, 2, Direction::LowerIsAnomalous));
  CHECK_FALSE(is_anomalous(110.0, 100.0, 10.0, 2, Direction::HigherIsAnomalous));
  CHECK(is_anomalous(110.5, 100.0, 10.0, 2, Direction::HigherIsAnomalous));
  CHECK(is_anomalous(100.5, 100.0, 10.0, 1, Direction::HigherIsAnomalous));
}

TEST_CASE("matches the literal rules on random streams") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> noise(95.0, 12.0);
  for (auto [B, D] : {std::pair{1, 1}, std::pair{2, 3}, std::pair{3, 2}, std::pair{4, 7}}) {
    for (auto dir : {Direction::LowerIsAnomalous, Direction::HigherIsAnomalous}) {
      const DetectorConfig cfg{B, D, dir};
      RefDetector ref{B, D};
      auto s = detector_reset(cfg);
      for (int i = 0; i < 20000; ++i) {
        const double x = dir == Direction::LowerIsAnomalous ? noise(gen) : 200.0 - noise(gen);
        const bool add = is_anomalous(x, kBase.mu, kBase.sigma, s.bucket, dir);
        const bool ref_alarm = ref.step(add);
        auto r = detector_step(s, x, kBase, cfg);
        REQUIRE(r.alarm == ref_alarm);
        s = r.alarm ? detector_reset(cfg) : r.state;
        REQUIRE(s.bucket == ref.b);
        REQUIRE(s.depth == ref.d);
        REQUIRE(s.bucket >= 1);
        REQUIRE(s.bucket <= B);
        REQUIRE(s.depth >= 0);
        REQUIRE(s.depth <= D);
      }
    }
  }
}

TEST_CASE("drain returns any state to the start") {
  const int B = 3, D = 4;
  const DetectorConfig cfg{B, D, Direction::LowerIsAnomalous};
  for (int b = 1; b <= B; ++b)
    for (int d = 0; d <= D; ++d) {
      DetectorState s{b, d, false};
      const int drain = (b - 1) * (D + 1) + d + 1;
      for (int i = 0; i < drain; ++i) s = detector_step(s, 1000.0, kBase, cfg).state;
      CHECK(s.bucket == 1);
      CHECK(s.depth == 0);
    }
}

TEST_CASE("detector_step rejects bad input") {
  const DetectorConfig cfg{2, 3, Direction::LowerIsAnomalous};
  const auto s = detector_reset(cfg);
  CHECK_THROWS_AS(detector_step(s, std::nan(""), kBase, cfg), Error);
  CHECK_THROWS_AS(detector_step(s, INFINITY, kBase, cfg), Error);
  CHECK_THROWS_AS(detector_step(s, 1.0, BaselineStats{100.0, 0.0, 10}, cfg), Error);
  CHECK_THROWS_AS(detector_step(s, 1.0, kBase, DetectorConfig{0, 3, Direction::LowerIsAnomalous}), Error);
  CHECK_THROWS_AS(detector_step(s, 1.0, kBase, DetectorConfig{2, 0, Direction::LowerIsAnomalous}), Error);
  CHECK_THROWS_AS(detector_step(DetectorState{2, 3, true}, 1.0, kBase, cfg), Error);
}

TEST_CASE("run_detector: per-key isolation and ordinals") {
  const StreamKey bad{"G1", "TRADE_LOOKUP", "1"};
  const StreamKey good{"G1", "TRADE_ORDER", "1"};
  BaselineProfile profile;
  profile.entries[bad] = kBase;
  profile.entries[good] = kBase;
  MonitorConfig cfg{{1, 1, Direction::LowerIsAnomalous}, {}};

  std::vector<Sample> stream;
  for (int i = 0; i < 2; ++i) {
    stream.push_back(at(bad, i, 10.0));
    stream.push_back(at(good, i, 150.0));
  }
  const auto alerts = run_detector(stream, profile, cfg, "r1");
  REQUIRE(alerts.size() == 1);
  CHECK(alerts[0].key == bad);
  CHECK(alerts[0].sample_index == 2);
  CHECK(alerts[0].time == 1.0);
  CHECK(alerts[0].run_id == "r1");

  CHECK(run_detector({}, profile, cfg).empty());
}

TEST_CASE("run_detector: 17 anomalous samples at B=2 D=15 give nothing") {
  const StreamKey k{"G", "T", "P"};
  BaselineProfile profile;
  profile.entries[k] = kBase;
  MonitorConfig cfg{{2, 15, Direction::LowerIsAnomalous}, {}};
  std::vector<Sample> stream;
  for (int i = 0; i < 17; ++i) stream.push_back(at(k, i, 0.0));
  CHECK(run_detector(stream, profile, cfg).empty());
  for (int i = 17; i < 32; ++i) stream.push_back(at(k, i, 0.0));
  const auto alerts = run_detector(stream, profile, cfg);
  REQUIRE(alerts.size() == 1);
  CHECK(alerts[0].sample_index == 32);
}

TEST_CASE("run_detector: missing baseline names the key") {
  BaselineProfile profile;
  profile.entries[{"G", "T", "1"}] = kBase;
  MonitorConfig cfg{{1, 1, Direction::LowerIsAnomalous}, {}};
  std::vector<Sample> stream{at({"G", "T", "1"}, 0, 1.0), at({"G", "X", "1"}, 0, 1.0)};
  try {
    run_detector(stream, profile, cfg);
    FAIL("expected MissingKey");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::MissingKey);
    CHECK(std::string(e.what()).find("G/X/1") != std::string::npos);
  }
  CHECK_THROWS_AS(run_detector_serial(stream, profile, cfg), Error);
  cfg.skip_unprofiled = true;
  CHECK(run_detector(stream, profile, cfg).empty());
  CHECK(run_detector_serial(stream, profile, cfg).empty());
}

TEST_CASE("auto-reset keeps detecting after an alarm") {
  const StreamKey k{"G", "T", "P"};
  BaselineProfile profile;
  profile.entries[k] = kBase;
  MonitorConfig cfg{{2, 2, Direction::LowerIsAnomalous}, {}};
  std::vector<Sample> stream;
  for (int i = 0; i < 18; ++i) stream.push_back(at(k, i, 0.0));
  const auto alerts = run_detector(stream, profile, cfg);
  REQUIRE(alerts.size() == 3);
  CHECK(alerts[0].sample_index == 6);
  CHECK(alerts[1].sample_index == 12);
  CHECK(alerts[2].sample_index == 18);
}

TEST_CASE("per-transaction depth override") {
  const StreamKey a{"G", "A", "P"};
  const StreamKey b{"G", "B", "P"};
  BaselineProfile profile;
  profile.entries[a] = kBase;
  profile.entries[b] = kBase;
  MonitorConfig cfg{{1, 1, Direction::LowerIsAnomalous}, {{"B", 4}}};
  CHECK(cfg.for_key(a).depth == 1);
  CHECK(cfg.for_key(b).depth == 4);
  std::vector<Sample> stream;
  for (int i = 0; i < 5; ++i) {
    stream.push_back(at(a, i, 0.0));
    stream.push_back(at(b, i, 0.0));
  }
  const auto alerts = run_detector(stream, profile, cfg);
  REQUIRE(alerts.size() == 3);  // a at 2 and 4, b at 5
  CHECK(alerts[0].key == a);
  CHECK(alerts[1].key == a);
  CHECK(alerts[2].key == b);
  CHECK(alerts[2].sample_index == 5);
}

TEST_CASE("parallel run_detector equals the serial reference") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(92.0, 11.0);
  BaselineProfile profile;
  std::vector<StreamKey> keys;
  for (int g = 0; g < 4; ++g)
    for (int t = 0; t < 9; ++t) {
      StreamKey k{"G" + std::to_string(g), "T" + std::to_string(t), "1"};
      profile.entries[k] = BaselineStats{100.0, 10.0 + t, 100};
      keys.push_back(k);
    }
  std::vector<Sample> stream;
  for (int i = 0; i < 3000; ++i)
    for (const auto& k : keys) stream.push_back(at(k, i, noise(gen)));
  MonitorConfig cfg{{2, 3, Direction::LowerIsAnomalous}, {{"T2", 1}, {"T5", 6}}};
  const auto par = run_detector(stream, profile, cfg, "x");
  const auto ser = run_detector_serial(stream, profile, cfg, "x");
  CHECK(par.size() > 10);
  CHECK(par == ser);

  std::map<StreamKey, std::uint64_t> last;
  for (const auto& a : par) {
    CHECK(a.sample_index > last[a.key]);
    last[a.key] = a.sample_index;
  }
}

TEST_CASE("detect_runs starts fresh detectors per run") {
  const StreamKey k{"G", "T", "P"};
  BaselineProfile profile;
  profile.entries[k] = kBase;
  MonitorConfig cfg{{1, 1, Direction::LowerIsAnomalous}, {}};
  RunSet runs;
  runs.runs.push_back(Run{"a", {at(k, 0, 0.0)}});
  runs.runs.push_back(Run{"b", {at(k, 0, 0.0)}});
  CHECK(detect_runs(runs, profile, cfg).empty());
  runs.runs[1].samples.push_back(at(k, 1, 0.0));
  const auto alerts = detect_runs(runs, profile, cfg);
  REQUIRE(alerts.size() == 1);
  CHECK(alerts[0].run_id == "b");
}

TEST_CASE("direction strings round-trip") {
  CHECK(direction_from_string(to_string(Direction::LowerIsAnomalous)) == Direction::LowerIsAnomalous);
  CHECK(direction_from_string(to_string(Direction::HigherIsAnomalous)) == Direction::HigherIsAnomalous);
  CHECK_THROWS_AS(direction_from_string("sideways"), Error);
}
