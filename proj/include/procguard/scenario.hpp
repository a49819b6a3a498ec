#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "procguard/archetype.hpp"
#include "procguard/trace.hpp"

namespace procguard {

struct ScenarioConfig {
  int benign_app_count = 5;
  int malicious_app_count = 1;
  Tick stagger_s = 1;
  Tick duration_s = 60;
  std::uint64_t seed = 0;
  int max_processes = 95;

  bool operator==(const ScenarioConfig&) const = default;
};

void validate(const ScenarioConfig& config);

struct AppRecord {
  std::string app_id;
  std::string archetype;
  Label label = Label::kBenign;
  Tick launch_tick = 0;
  std::optional<DamageSpec> damage;

  bool operator==(const AppRecord&) const = default;
};

// One scheduled process. It is born at `birth`, would exit at `end` if never
// killed, and emits a snapshot at every tick in (birth, end].
struct ProcessPlan {
  Pid pid = 0;
  std::optional<Pid> parent;
  std::string app_id;
  Label label = Label::kBenign;
  Tick birth = 0;
  Tick end = 0;
  bool damaging = false;
  std::vector<FeatureVector> features;  // features[k] is the snapshot at birth + 1 + k

  Tick unkilled_duration() const { return end - birth; }
  bool operator==(const ProcessPlan&) const = default;
};

struct Scenario {
  std::string id;
  ScenarioConfig config;
  std::vector<AppRecord> apps;
  std::vector<ProcessPlan> processes;  // ordered by (birth, pid)

  const AppRecord* find_app(const std::string& app_id) const;
  const ProcessPlan* find_process(Pid pid) const;
  bool operator==(const Scenario&) const = default;
};

// Seeded draw of archetypes, staggered launches and fully materialised
// feature streams. Throws ConfigError for an empty or one-label library.
Scenario generate_scenario(const ScenarioConfig& config, const ArchetypeLibrary& library,
                           const std::string& scenario_id = "s0");

// Unkilled traces of every scheduled process.
std::vector<ProcessTrace> scenario_traces(const Scenario& scenario);
std::vector<ProcessTrace> scenario_traces(const std::vector<Scenario>& scenarios);

// Scenario export: traces.jsonl plus truth.json (apps, process tree and
// schedule). Reading reverses it exactly.
void write_scenarios(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir);
std::vector<Scenario> read_scenarios(const std::filesystem::path& dir);

std::string serialize_truth(const std::vector<Scenario>& scenarios);

inline constexpr const char* kTracesFile = "traces.jsonl";
inline constexpr const char* kTruthFile = "truth.json";

}  // namespace procguard
