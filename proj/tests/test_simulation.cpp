#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "procguard/error.hpp"
#include "procguard/metrics.hpp"
#include "procguard/simulator.hpp"
#include "support.hpp"

using namespace procguard;
using procguard::testing::plan;
using procguard::testing::three_process_tree;

namespace {

// Fires on chosen pids from a given tick on.
class ScriptedDetector : public Detector {
 public:
  std::map<Pid, Tick> fire_from;
  double score(const ProcessSnapshot& s) override {
    auto it = fire_from.find(s.process_id);
    return it != fire_from.end() && s.tick >= it->second ? 1.0 : 0.0;
  }
};

Scenario single_ransomware(Tick duration, double rate, Tick onset) {
  Scenario s;
  s.id = "r";
  s.config.duration_s = duration;
  s.apps.push_back({"app", "ransom", Label::kMalicious, 0, DamageSpec{onset, rate}});
  s.processes.push_back(plan(1, std::nullopt, 0, duration, Label::kMalicious, "app", true));
  return s;
}

std::size_t count_events(const std::vector<SimEvent>& log, EventKind kind) {
  return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [&](const SimEvent& e) { return e.kind == kind; }));
}

}  // namespace

TEST_CASE("archetype library") {
  const auto lib = default_library();
  CHECK_NOTHROW(validate(lib));
  bool benign = false, malicious = false, burst = false;
  for (const auto& a : lib.archetypes) {
    benign = benign || a.label == Label::kBenign;
    malicious = malicious || a.label == Label::kMalicious;
    if (a.label == Label::kBenign)
      for (const auto& p : a.processes) burst = burst || !p.bursts.empty();
  }
  CHECK(benign);
  CHECK(malicious);
  CHECK(burst);
  CHECK(parse_library(serialize(lib)) == lib);

  SUBCASE("shipped data file matches the built-in library") {
    CHECK(load_library(PROCGUARD_SOURCE_DIR "/data/archetypes.json") == lib);
  }
  SUBCASE("broken libraries") {
    auto bad = lib;
    bad.archetypes[0].processes[0].duration_min_s = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = lib;
    bad.archetypes.back().damage->files_per_second = -1;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    CHECK_THROWS_AS(parse_library("{}"), ConfigError);
    CHECK_THROWS_AS(load_library("/nonexistent/lib.json"), ConfigError);
  }
}

TEST_CASE("scenario generation") {
  const auto lib = default_library();
  ScenarioConfig c;
  c.seed = 42;
  SUBCASE("same seed, same scenario") {
    CHECK(generate_scenario(c, lib) == generate_scenario(c, lib));
    auto d = c;
    d.seed = 43;
    CHECK_FALSE(generate_scenario(c, lib) == generate_scenario(d, lib));
  }
  SUBCASE("a full 36-app mix schedules staggered launches") {
    c.benign_app_count = 35;
    c.malicious_app_count = 1;
    c.stagger_s = 1;
    const auto s = generate_scenario(c, lib);
    REQUIRE(s.apps.size() == 36);
    for (std::size_t i = 0; i < s.apps.size(); ++i) CHECK(s.apps[i].launch_tick == static_cast<Tick>(i) * c.stagger_s);
    CHECK(s.processes.size() <= 95);
    int malicious = 0;
    for (const auto& a : s.apps) malicious += a.label == Label::kMalicious;
    CHECK(malicious == 1);
  }
  SUBCASE("plans respect the tree and time invariants") {
    c.benign_app_count = 20;
    c.malicious_app_count = 2;
    const auto s = generate_scenario(c, lib);
    std::set<Pid> seen;
    for (const auto& p : s.processes) {
      CHECK(p.end > p.birth);
      CHECK(p.end <= c.duration_s);
      CHECK(p.features.size() == static_cast<std::size_t>(p.end - p.birth));
      if (p.parent) {
        CHECK(seen.count(*p.parent) == 1);  // parents come first
        const auto* parent = s.find_process(*p.parent);
        CHECK(p.birth < parent->end);
        CHECK(p.label == parent->label);
      }
      for (const auto& f : p.features) CHECK(features_valid(f));
      seen.insert(p.pid);
    }
  }
  SUBCASE("bad configs") {
    auto bad = c;
    bad.benign_app_count = 36;
    CHECK_THROWS_AS(generate_scenario(bad, lib), ConfigError);
    bad = c;
    bad.malicious_app_count = 0;
    CHECK_THROWS_AS(generate_scenario(bad, lib), ConfigError);
    CHECK_THROWS_AS(generate_scenario(c, ArchetypeLibrary{}), ConfigError);
    ArchetypeLibrary benign_only;
    for (const auto& a : lib.archetypes)
      if (a.label == Label::kBenign) benign_only.archetypes.push_back(a);
    CHECK_THROWS_AS(generate_scenario(c, benign_only), ConfigError);
  }
}

TEST_CASE("scenario export round trip") {
  const auto lib = default_library();
  std::vector<Scenario> scenarios;
  for (int i = 0; i < 3; ++i) {
    ScenarioConfig c;
    c.seed = 100 + i;
    c.benign_app_count = 3 + i;
    scenarios.push_back(generate_scenario(c, lib, "s" + std::to_string(i)));
  }
  const auto dir = testing::temp_dir("export");
  write_scenarios(scenarios, dir);
  CHECK(read_scenarios(dir) == scenarios);
  std::filesystem::remove(dir / kTruthFile);
  CHECK_THROWS_AS(read_scenarios(dir), InputError);
}

TEST_CASE("step: damage accrual and snapshots") {
  SUBCASE("unkilled ransomware for 60 ticks") {
    const auto s = single_ransomware(60, 10, 0);
    ScriptedDetector never;
    const auto run = run_with_detector(s, never, 0.5);
    CHECK(run.total_files_modified() == 600.0);
    CHECK(run.total_files_modified_unkilled() == 600.0);
    CHECK(count_events(run.log, EventKind::kSnapshot) == 60);
  }
  SUBCASE("killed at tick 5") {
    const auto s = single_ransomware(60, 10, 0);
    ScriptedDetector d;
    d.fire_from[1] = 5;
    const auto run = run_with_detector(s, d, 0.5);
    CHECK(run.total_files_modified() == 50.0);
    CHECK(run.records[0].runtime == 5);
    // No snapshot after the kill.
    for (const auto& e : run.log)
      if (e.kind == EventKind::kSnapshot) CHECK(e.tick <= 5);
  }
  SUBCASE("onset delay") {
    const auto s = single_ransomware(20, 4, 3);
    ScriptedDetector never;
    CHECK(run_with_detector(s, never, 0.5).total_files_modified() == 4.0 * 17);
    CHECK(unkilled_damage(s).at("app") == 4.0 * 17);
  }
}

TEST_CASE("kill cascade on the three-process example") {
  const auto s = three_process_tree();
  SUBCASE("parent killed at t=5 takes both children with it") {
    auto state = start_simulation(s);
    for (int i = 0; i < 5; ++i) step(state);
    kill(state, 10, 5);
    for (const auto& n : state.nodes) CHECK(n.killed_at == Tick{5});
    const auto records = process_records(state);
    CHECK(records[0].runtime == 5);
    CHECK(records[1].runtime == 4);
    CHECK(records[2].runtime == 4);
    CHECK(fnr_over_time(records).value == doctest::Approx(13.0 / 170.0));
    std::size_t cascades = 0;
    for (const auto& e : state.log) cascades += e.kind == EventKind::kKill && e.trigger == KillTrigger::kCascade;
    CHECK(cascades == 2);
  }
  SUBCASE("parent killed at t=1 as the children are born") {
    ScriptedDetector d;
    d.fire_from[10] = 1;
    const auto run = run_with_detector(s, d, 0.5);
    CHECK(run.records[0].runtime == 1);
    CHECK(run.records[1].runtime == 0);
    CHECK(run.records[2].runtime == 0);
    CHECK(fnr_over_time(run.records).value == doctest::Approx(1.0 / 170.0));
  }
  SUBCASE("killing a leaf is a single event") {
    auto state = start_simulation(s);
    for (int i = 0; i < 3; ++i) step(state);
    kill(state, 12, 3);
    CHECK(count_events(state.log, EventKind::kKill) == 1);
    CHECK_FALSE(state.nodes[0].killed_at);
  }
  SUBCASE("dead or unknown pids are a warning, not a change") {
    auto state = start_simulation(s);
    for (int i = 0; i < 25; ++i) step(state);
    const auto before = state.log;
    kill(state, 12, 25);  // exited at 21
    kill(state, 999, 25);
    CHECK(state.log == before);
    CHECK(state.warnings.size() == 2);
  }
}

TEST_CASE("a cascade passes through a child that already exited") {
  // A (0-60) spawns B (1-10), which spawns C (5-50) before exiting.
  Scenario s;
  s.id = "orphan";
  s.config.duration_s = 60;
  s.apps.push_back({"app", "x", Label::kMalicious, 0, std::nullopt});
  s.processes.push_back(plan(1, std::nullopt, 0, 60));
  s.processes.push_back(plan(2, Pid{1}, 1, 10));
  s.processes.push_back(plan(3, Pid{2}, 5, 50));
  ScriptedDetector d;
  d.fire_from[1] = 20;
  const auto live = run_with_detector(s, d, 0.5);
  CHECK(live.records[0].killed_at == Tick{20});
  CHECK_FALSE(live.records[1].killed_at);
  CHECK(live.records[1].runtime == 9);
  CHECK(live.records[2].killed_at == Tick{20});
  CHECK(live.records[2].runtime == 15);
  CHECK(replay_kills(score_scenario(s, d), 0.5) == live.records);
}

TEST_CASE("property: kill cascade conservation on random forests") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = testing::random_forest_scenario(rng);
    // Kill a random root at a random tick inside its life.
    std::vector<const ProcessPlan*> roots;
    for (const auto& p : s.processes)
      if (!p.parent) roots.push_back(&p);
    const auto* root = roots[std::uniform_int_distribution<std::size_t>(0, roots.size() - 1)(rng)];
    const Tick at = std::uniform_int_distribution<Tick>(root->birth, root->end - 1)(rng);
    auto state = start_simulation(s);
    while (state.clock < at) step(state);
    if (state.running(state.nodes[state.by_pid.at(root->pid)], at)) kill(state, root->pid, at);
    while (state.clock < s.config.duration_s) step(state);

    const auto records = process_records(state);
    std::map<Pid, Tick> killed;
    for (const auto& e : state.log)
      if (e.kind == EventKind::kKill) killed[e.pid] = e.tick;
    for (const auto& e : state.log)
      if (e.kind == EventKind::kSnapshot && killed.count(e.pid)) CHECK(e.tick <= killed[e.pid]);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& p = s.processes[i];
      const auto& r = records[i];
      const Tick stop = r.killed_at ? std::min(*r.killed_at, p.end) : p.end;
      CHECK(r.runtime == std::max(Tick{0}, stop - p.birth));
      CHECK(r.runtime <= r.unkilled_duration);
      // Executed seconds equal the snapshots the process emitted.
      const auto emitted = std::count_if(state.log.begin(), state.log.end(), [&](const SimEvent& e) {
        return e.kind == EventKind::kSnapshot && e.pid == p.pid;
      });
      CHECK(emitted == r.runtime);
      if (r.killed_at) CHECK(*r.killed_at == at);
    }
  }
}

TEST_CASE("property: replayed kills equal live runs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = testing::random_forest_scenario(rng);
    ScriptedDetector d;
    for (const auto& p : s.processes)
      if (std::bernoulli_distribution(0.3)(rng))
        d.fire_from[p.pid] = std::uniform_int_distribution<Tick>(p.birth + 1, p.end)(rng);
    const auto live = run_with_detector(s, d, 0.5);
    const auto replayed = replay_kills(score_scenario(s, d), 0.5);
    CHECK(live.records == replayed);
    // Never firing is the damage ceiling.
    ScriptedDetector never;
    CHECK(live.total_files_modified() <= run_with_detector(s, never, 0.5).total_files_modified());
  }
}

TEST_CASE("event log is deterministic") {
  const auto lib = default_library();
  ScenarioConfig c;
  c.seed = 9;
  c.benign_app_count = 10;
  const auto s = generate_scenario(c, lib);
  ScriptedDetector d;
  for (const auto& p : s.processes)
    if (p.label == Label::kMalicious) d.fire_from[p.pid] = p.birth + 2;
  const auto a = run_with_detector(s, d, 0.5), b = run_with_detector(s, d, 0.5);
  CHECK(serialize_event_log(a) == serialize_event_log(b));
  CHECK(a.total_files_modified() < a.total_files_modified_unkilled());
}
