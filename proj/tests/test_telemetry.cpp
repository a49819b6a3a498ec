#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "procguard/error.hpp"
#include "procguard/normalization.hpp"
#include "procguard/sampler.hpp"
#include "procguard/trace_io.hpp"
#include "support.hpp"

using namespace procguard;

namespace {

ProcessTrace trace_of(std::vector<FeatureVector> rows, Pid pid = 1, Label label = Label::kBenign, Tick first = 1) {
  ProcessTrace t;
  t.process_id = pid;
  t.app_id = "a";
  t.label = label;
  for (std::size_t i = 0; i < rows.size(); ++i)
    t.snapshots.push_back({pid, std::nullopt, "a", first + static_cast<Tick>(i), rows[i]});
  t.unkilled_duration_s = static_cast<Tick>(rows.size());
  return t;
}

FeatureVector filled(double v) {
  FeatureVector f;
  f.fill(v);
  return f;
}

FeatureVector random_features(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1e6);
  FeatureVector f;
  for (auto& x : f) x = u(rng);
  return f;
}

}  // namespace

TEST_CASE("feature order and names") {
  CHECK(kFeatureCount == 26);
  CHECK(kFeatureNames[index(Feature::kCpuSystemPct)] == "cpu_system_pct");
  CHECK(kFeatureNames[index(Feature::kMaxChildProcessId)] == "max_process_id");
  CHECK(kFeatureNames[index(Feature::kSecondsSinceStart)] == "seconds_since_start");
  CHECK(kFeatureNames[index(Feature::kPortStatusOther)] == "port_status_other");
  FeatureVector v{};
  CHECK(features_valid(v));
  v[index(Feature::kProcessPriority)] = -5;
  CHECK(features_valid(v));
  v[index(Feature::kIoReadBytes)] = -1;
  CHECK_FALSE(features_valid(v));
}

TEST_CASE("compute_stats examples") {
  SUBCASE("single constant snapshot gets the unit-std guard") {
    std::vector<FeatureVector> rows{filled(5)};
    const auto s = compute_stats(rows);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(s.mean[i] == 5.0);
      CHECK(s.std[i] == 1.0);
    }
  }
  SUBCASE("population std") {
    FeatureVector a{}, b{};
    b[0] = 2;
    std::vector<FeatureVector> rows{a, b};
    const auto s = compute_stats(rows);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.std[0] == 1.0);
  }
  SUBCASE("empty input") {
    std::vector<ProcessTrace> none;
    CHECK_THROWS_WITH_AS(compute_stats(none), "no training data", InputError);
    std::vector<ProcessTrace> empty_trace{trace_of({})};
    CHECK_THROWS_AS(compute_stats(empty_trace), InputError);
  }
  SUBCASE("stats use only the traces handed in") {
    std::vector<ProcessTrace> train{trace_of({filled(1), filled(3)})};
    const auto before = compute_stats(train);
    std::vector<ProcessTrace> test{trace_of({filled(100)})};
    (void)compute_stats(test);
    CHECK(compute_stats(train) == before);
  }
}

TEST_CASE("normalize examples") {
  NormalizationStats s;
  s.mean = filled(1);
  s.std = filled(4);
  CHECK(normalize(s.mean, s) == filled(0));
  FeatureVector up;
  for (std::size_t i = 0; i < kFeatureCount; ++i) up[i] = s.mean[i] + s.std[i];
  CHECK(normalize(up, s) == filled(1));
  FeatureVector v = filled(1);
  v[0] = 3;
  CHECK(normalize(v, s)[0] == 0.5);
}

TEST_CASE("property: normalization inverts") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 7; ++i) rows.push_back(random_features(rng));
    const auto s = compute_stats(rows);
    for (const auto& v : rows) {
      const auto back = denormalize(normalize(v, s), s);
      for (std::size_t i = 0; i < kFeatureCount; ++i)
        CHECK(std::abs(back[i] - v[i]) <= 1e-9 * std::max(1.0, std::abs(v[i])));
    }
  }
}

TEST_CASE("property: compute_stats ignores snapshot order") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 20; ++i) rows.push_back(random_features(rng));
    const auto a = compute_stats(rows);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto b = compute_stats(rows);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(a.mean[i] == doctest::Approx(b.mean[i]).epsilon(1e-12));
      CHECK(a.std[i] == doctest::Approx(b.std[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("trace file round trip") {
  std::mt19937_64 rng(3);
  std::vector<ProcessTrace> traces;
  for (int p = 0; p < 6; ++p) {
    std::vector<FeatureVector> rows;
    const int n = 1 + p * 3;
    for (int i = 0; i < n; ++i) {
      auto f = random_features(rng);
      f[index(Feature::kProcessPriority)] = -3.25;
      f[3] = 1.0 / 3.0;
      rows.push_back(f);
    }
    auto t = trace_of(rows, 100 + p, p % 2 ? Label::kMalicious : Label::kBenign, p);
    if (p > 0) {
      t.parent_id = 100;
      for (auto& s : t.snapshots) s.parent_id = 100;
    }
    traces.push_back(t);
  }
  std::stringstream buffer;
  write_traces(traces, buffer);
  const auto back = read_traces(buffer);
  REQUIRE(back.size() == traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) CHECK(back[i] == traces[i]);
}

TEST_CASE("trace reader groups and sorts") {
  std::stringstream in;
  FeatureVector f{};
  ProcessSnapshot late{7, std::nullopt, "x", 5, f}, early{7, std::nullopt, "x", 4, f}, other{7, std::nullopt, "y", 1, f};
  in << format_snapshot_record(late, Label::kBenign) << "\n"
     << format_snapshot_record(other, Label::kMalicious) << "\n"
     << format_snapshot_record(early, Label::kBenign) << "\n";
  const auto traces = read_traces(in);
  REQUIRE(traces.size() == 2);
  CHECK(traces[0].app_id == "x");
  CHECK(traces[0].snapshots.front().tick == 4);
  CHECK(traces[0].unkilled_duration_s == 2);
  CHECK(traces[1].label == Label::kMalicious);
}

TEST_CASE("trace reader errors") {
  SUBCASE("empty file is an empty dataset") {
    std::stringstream in;
    CHECK(read_traces(in).empty());
  }
  SUBCASE("feature arity names the line") {
    std::stringstream in;
    in << format_snapshot_record({1, std::nullopt, "a", 1, {}}, Label::kBenign) << "\n";
    in << R"({"app_id":"a","pid":2,"ppid":null,"tick":1,"label":"benign","f":[1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25]})"
       << "\n";
    try {
      read_traces(in);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("malformed line") {
    std::stringstream in("{not json\n");
    CHECK_THROWS_WITH_AS(read_traces(in), doctest::Contains("line 1"), InputError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_traces(std::filesystem::path("/nonexistent/traces.jsonl")), InputError);
  }
}

TEST_CASE("validate_trace rejects broken traces") {
  auto t = trace_of({filled(1), filled(2)});
  CHECK_NOTHROW(validate_trace(t));
  auto backwards = t;
  backwards.snapshots[1].tick = backwards.snapshots[0].tick;
  CHECK_THROWS_AS(validate_trace(backwards), InputError);
  auto short_life = t;
  short_life.unkilled_duration_s = 0;
  CHECK_THROWS_AS(validate_trace(short_life), InputError);
  auto self_parent = t;
  self_parent.parent_id = t.process_id;
  CHECK_THROWS_AS(validate_trace(self_parent), InputError);
}

// --- sampler against a fabricated /proc tree --------------------------------

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

void fake_process(const std::filesystem::path& root, Pid pid, Pid ppid, double read_bytes, double syscr,
                  double utime, unsigned long long start = 100) {
  const auto dir = root / std::to_string(pid);
  std::ostringstream stat;
  // Fields 1..22: pid (comm) state ppid ... utime(14) stime(15) ... priority(18) nice threads(20) itreal start(22)
  stat << pid << " (fake proc) S " << ppid << " 0 0 0 0 0 0 0 0 0 " << utime << " 5 0 0 20 0 3 0 " << start
       << " 0 0";
  write_file(dir / "stat", stat.str());
  write_file(dir / "status", "Name:\tfake\nVmSize:\t  2000 kB\nVmRSS:\t  1000 kB\nVmSwap:\t 0 kB\n");
  std::ostringstream io;
  io << "rchar: 0\nwchar: 0\nsyscr: " << syscr << "\nsyscw: 2\nread_bytes: " << read_bytes
     << "\nwrite_bytes: 10\ncancelled_write_bytes: 0\n";
  write_file(dir / "io", io.str());
  write_file(dir / "cmdline", std::string("fake\0--flag\0", 12));
  std::filesystem::create_directories(dir / "fd");
}

}  // namespace

TEST_CASE("sampler on a fake process table") {
  const auto root = testing::temp_dir("proc");
  write_file(root / "uptime", "500.00 100.00\n");
  fake_process(root, 10, 1, 1000, 5, 50);
  fake_process(root, 11, 10, 0, 0, 0);
  SamplerState state;
  SamplerOptions options;
  options.proc_root = root;

  auto first = sample_processes(state, options);
  REQUIRE(first.size() == 2);
  CHECK(state.tick == 0);
  const auto& parent = first[0];
  CHECK(parent.process_id == 10);
  CHECK(parent.parent_id == Pid{1});
  CHECK(parent.features[index(Feature::kIoReadBytes)] == 0.0);  // first sighting
  CHECK(parent.features[index(Feature::kChildProcessCount)] == 1.0);
  CHECK(parent.features[index(Feature::kMaxChildProcessId)] == 11.0);
  CHECK(parent.features[index(Feature::kCmdlineArgCount)] == 2.0);
  CHECK(parent.features[index(Feature::kMemPhysicalBytes)] == 1000.0 * 1024);
  CHECK(parent.features[index(Feature::kThreadCount)] == 3.0);
  CHECK(first[1].parent_id == Pid{10});

  SUBCASE("no activity gives zero deltas") {
    write_file(root / "uptime", "501.00 100.00\n");
    auto second = sample_processes(state, options);
    REQUIRE(second.size() == 2);
    CHECK(second[0].tick == 1);
    for (auto f : kDeltaFeatures) CHECK(second[0].features[index(f)] == 0.0);
    CHECK(state.terminated.empty());
  }
  SUBCASE("counter growth is reported as a delta") {
    fake_process(root, 10, 1, 4096, 9, 150);
    write_file(root / "uptime", "501.00 100.00\n");
    auto second = sample_processes(state, options);
    CHECK(second[0].features[index(Feature::kIoReadBytes)] == 4096.0 - 1000.0);
    CHECK(second[0].features[index(Feature::kIoReadCount)] == 4.0);
    CHECK(second[0].features[index(Feature::kCpuUserPct)] > 0.0);
  }
  SUBCASE("a vanished process is marked terminated") {
    std::filesystem::remove_all(root / "11");
    auto second = sample_processes(state, options);
    CHECK(second.size() == 1);
    CHECK(state.terminated.count(11) == 1);
  }
  SUBCASE("a reused pid starts over") {
    fake_process(root, 11, 10, 5000, 7, 0, 999);
    auto second = sample_processes(state, options);
    CHECK(second[1].features[index(Feature::kIoReadBytes)] == 0.0);
    CHECK(state.terminated.count(11) == 1);
  }
  SUBCASE("unreadable process is skipped with a warning") {
    std::filesystem::remove(root / "11" / "io");
    auto second = sample_processes(state, options);
    CHECK(second.size() == 1);
    REQUIRE(state.warnings.size() == 1);
    CHECK(state.warnings[0].find("pid 11") != std::string::npos);
  }
}

TEST_CASE("sampler on the live host") {
  SamplerState state;
  const auto first = sample_processes(state);
  const auto self = static_cast<Pid>(::getpid());
  bool found = false;
  for (const auto& s : first) found = found || s.process_id == self;
  CHECK(found);
  const auto second = sample_processes(state);
  for (const auto& s : second) CHECK(s.tick == 1);
  for (const auto& s : second) CHECK(features_valid(s.features));
}

TEST_CASE("sampler without a process table") {
  SamplerState state;
  SamplerOptions options;
  options.proc_root = "/nonexistent/proc";
  CHECK_THROWS_AS(sample_processes(state, options), SamplerError);
}
