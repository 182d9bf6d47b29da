#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <regex>

#include <json.hpp>

#include "bucketwatch/calibrator.hpp"
#include "bucketwatch/io.hpp"
#include "bucketwatch/profiler.hpp"

using namespace bucketwatch;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(BUCKETWATCH_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("bucketwatch_cli_" + name + "_" + std::to_string(getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::optional<int> printed_depth(const std::string& out, const std::string& label) {
  std::smatch m;
  const std::regex re(label + ": D=([0-9]+)");
  if (std::regex_search(out, m, re)) return std::stoi(m[1]);
  return std::nullopt;
}

const std::string kFixture = std::string(BUCKETWATCH_FIXTURES) + "/trade_lookup_walk.json";

// 9 transactions x 4 groups in one short phase
std::string grid_config(const TempDir& dir) {
  nlohmann::json keys = nlohmann::json::array();
  for (int g = 1; g <= 4; ++g)
    for (int t = 1; t <= 9; ++t)
      keys.push_back({{"group", "G" + std::to_string(g)}, {"transaction", "TX" + std::to_string(t)}});
  nlohmann::json cfg = {
      {"simulation",
       {{"workload", {{"keys", keys}, {"phases", {{{"id", "1"}, {"duration", 200}}, {{"id", "4"}, {"duration", 400}}}}}},
        {"faults", {{{"pattern", "H"}, {"phase", "4"}, {"start_offset", 50}},
                    {{"pattern", "Ls"}, {"phase", "4"}, {"start_offset", 50}}}},
        {"n_runs", 2},
        {"golden_runs", 4}}},
      {"profiling", {{"min_samples", 10}}}};
  const auto path = dir / "config.json";
  write_file_atomic(path, cfg.dump());
  return path;
}

}  // namespace

TEST_CASE("calibrate on the fixture matches the library") {
  const WalkParams p{{0.46, 0.71}};
  for (const char* model : {"exponential", "deterministic"})
    for (const char* source : {"auto", "exact"}) {
      const auto r = run("calibrate --walks " + kFixture + " --key G1/TRADE_LOOKUP/all --alpha 2e-6 --F 0.03 --model " +
                         model + " --source " + source);
      REQUIRE(r.code == 0);
      const auto m = false_alarm_model_from_string(model);
      const auto src = absorption_source_from_string(source);
      CHECK(printed_depth(r.out, "chosen_hard") == min_depth_hard(p, 2e-6, 0.03, m, {}, src));
      CHECK(printed_depth(r.out, "chosen_soft") == optimal_depth_soft(p, 909.0, 2e-6, m, {}, src));
      CHECK(r.out.find("lower_bound_L: ") != std::string::npos);
    }
  const auto z = run("calibrate --walks " + kFixture + " --key G1/TRADE_LOOKUP/all --alpha 0");
  CHECK(z.code == 0);
  CHECK(z.out.find("chosen_hard: infeasible") != std::string::npos);
}

TEST_CASE("calibrate writes the sweep table") {
  TempDir dir("sweep");
  const auto r = run("calibrate --p 0.46,0.71 --d-range 1:30 --out-csv " + (dir / "s.csv") + " --out-json " +
                     (dir / "s.json"));
  REQUIRE(r.code == 0);
  const auto csv = read_file(dir / "s.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
  CHECK(nlohmann::json::parse(read_file(dir / "s.json"))["rows"].size() == 30);
}

TEST_CASE("errors exit nonzero with one category line") {
  TempDir dir("errors");
  write_file_atomic(dir / "empty.csv", "");
  write_file_atomic(dir / "bad.csv", std::string(kSampleCsvHeader) + "\nr,G,T,1,0,oops\n");
  const std::regex line("^error: [a-z_]+: [^\n]*\n$");
  for (const std::string& args : std::vector<std::string>{"profile --input " + (dir / "empty.csv") + " --out " + (dir / "p.json"),
        "profile --input " + (dir / "missing.csv") + " --out " + (dir / "p.json"),
        "detect --profile " + (dir / "missing.json") + " --input " + (dir / "bad.csv") + " --alerts " + (dir / "a.json"),
        "calibrate --walks " + kFixture + " --key G9/NOPE/1",
        "calibrate --p 0.5,1.5"}) {
    const auto r = run(args);
    CHECK(r.code != 0);
    CHECK_MESSAGE(std::regex_match(r.out, line), r.out);
  }
  CHECK(run("").code == 2);
  CHECK(run("profile").code == 2);
}

TEST_CASE("end to end pipeline is deterministic") {
  TempDir a("e2e_a"), b("e2e_b");
  const auto cfg = grid_config(a);
  for (const TempDir* d : {&a, &b}) {
    REQUIRE(run("simulate --config " + cfg + " --out-dir " + d->path.string() + " --seed 5").code == 0);
    const auto p = run("profile --config " + cfg + " --input " + (*d / "golden.csv") + " --out " +
                       (*d / "profile.json") + " --validation-out " + (*d / "validation.csv"));
    REQUIRE_MESSAGE(p.code == 0, p.out);
    const auto det = run("detect --config " + cfg + " --profile " + (*d / "profile.json") + " --input " +
                         (*d / "faulted.csv") + " --alerts " + (*d / "alerts.json") + " -D 13");
    REQUIRE_MESSAGE(det.code == 0, det.out);
    const auto ev = run("evaluate --config " + cfg + " --alerts " + (*d / "alerts.json") + " --schedules " +
                        (*d / "schedules.json") + " --out " + (*d / "report") + " -D 13");
    REQUIRE_MESSAGE(ev.code == 0, ev.out);
  }
  for (const char* f : {"golden.csv", "faulted.csv", "schedules.json", "workload.json", "profile.json",
                        "profile.walks.json", "validation.csv", "alerts.json", "report.csv", "report.json"})
    CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);

  const auto prof = load_profile(a / "profile.json");
  // 36 keys in the profiled phase plus 36 in the attack phase
  CHECK(prof.entries.size() == 72);
  std::size_t phase1 = 0;
  for (const auto& [k, st] : prof.entries) phase1 += k.phase == "1";
  CHECK(phase1 == 36);

  const auto report = nlohmann::json::parse(read_file(a / "report.json"));
  REQUIRE(report["rows"].size() == 3);
  CHECK(report["rows"][2]["fault_model"] == "all");
  // a 60% mean drop over a full 300 s window is always caught at D=13
  CHECK(report["rows"][0]["fault_model"] == "4H");
  CHECK(report["rows"][0]["recall"] == 1.0);
}

TEST_CASE("evaluate on an empty alert set is all false negatives") {
  TempDir dir("empty_alerts");
  REQUIRE(run("simulate --out-dir " + dir.path.string() + " --runs 2 --golden-runs 2").code == 0);
  write_file_atomic(dir / "alerts.json", "{\"version\": 1, \"alerts\": []}");
  const auto r = run("evaluate --alerts " + (dir / "alerts.json") + " --schedules " + (dir / "schedules.json") +
                     " --out " + (dir / "r.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const auto csv = read_file(dir / "r.csv");
  auto lines = split_fields(csv, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  REQUIRE(lines.size() == 1 + 6 + 1);
  const std::vector<std::string> models{"4H", "4L", "4Ls", "6H", "6L", "6Ls"};
  for (std::size_t i = 0; i < models.size(); ++i)
    CHECK(lines[i + 1] == models[i] + ",2,15,0,0,2,0,NA,0,NA");
  CHECK(lines.back() == "all,2,15,0,0,12,0,NA,0,NA");
}

TEST_CASE("detect reads standard input") {
  TempDir dir("stdin");
  BaselineProfile prof;
  prof.entries[{"G", "T", "1"}] = BaselineStats{100.0, 10.0, 50};
  save_profile(prof, dir / "p.json");
  std::string csv = std::string(kSampleCsvHeader) + "\n";
  for (int i = 0; i < 4; ++i) csv += "r,G,T,1," + std::to_string(i) + ",50\n";
  write_file_atomic(dir / "in.csv", csv);
  const auto r = run("detect --profile " + (dir / "p.json") + " --input - --alerts " + (dir / "a.json") +
                     " -B 1 -D 1 < " + (dir / "in.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const auto alerts = nlohmann::json::parse(read_file(dir / "a.json"))["alerts"];
  REQUIRE(alerts.size() == 2);
  CHECK(alerts[0]["sample_index"] == 2);
  CHECK(alerts[1]["sample_index"] == 4);
}

TEST_CASE("config file from the environment, flags win") {
  TempDir dir("env");
  write_file_atomic(dir / "c.json", R"({"calibration": {"alpha": 0}})");
  const auto env = "BUCKETWATCH_CONFIG=" + (dir / "c.json") + " ";
  const std::string cmd = std::string(BUCKETWATCH_CLI) + " calibrate --p 0.46,0.71";
  auto capture = [](const std::string& c) {
    std::string out;
    FILE* pipe = popen(c.c_str(), "r");
    std::array<char, 1024> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
    pclose(pipe);
    return out;
  };
  CHECK(capture(env + cmd).find("chosen_hard: infeasible") != std::string::npos);
  CHECK(capture(env + cmd + " --alpha 2e-6").find("chosen_hard: D=") != std::string::npos);
}
