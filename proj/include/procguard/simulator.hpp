#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "procguard/metrics.hpp"
#include "procguard/scenario.hpp"

namespace procguard {

enum class EventKind : std::uint8_t { kSpawn, kSnapshot, kExit, kKill };
enum class KillTrigger : std::uint8_t { kNone, kDirect, kCascade };

struct SimEvent {
  Tick tick = 0;
  EventKind kind = EventKind::kSpawn;
  Pid pid = 0;
  KillTrigger trigger = KillTrigger::kNone;

  bool operator==(const SimEvent&) const = default;
};

struct ProcessNode {
  Pid pid = 0;
  std::optional<Pid> parent;
  std::size_t plan = 0;  // index into scenario.processes
  Tick birth = 0;
  Tick scheduled_end = 0;
  bool spawned = false;
  std::optional<Tick> killed_at;
};

// Tick-synchronous replay of one scenario. Holds a reference to the
// scenario, which must outlive the state.
struct SimulationState {
  const Scenario* scenario = nullptr;
  Tick clock = 0;
  std::vector<ProcessNode> nodes;
  std::unordered_map<Pid, std::size_t> by_pid;
  std::unordered_map<Pid, std::vector<Pid>> children;
  std::vector<SimEvent> log;
  std::map<std::string, double> files_modified;  // per malicious app
  std::vector<std::string> warnings;

  bool running(const ProcessNode& n, Tick tick) const;
};

// Clock 0 with every process born at tick 0 spawned.
SimulationState start_simulation(const Scenario& scenario);

// Accrues damage for the second [clock, clock + 1), advances the clock,
// retires processes that reach their end, spawns due processes and returns one
// snapshot per process that was alive through the elapsed second.
std::vector<ProcessSnapshot> step(SimulationState& state);

// Kills pid and every descendant that has not exited, including ones not yet
// spawned. Unknown, exited or already killed pids are a no-op with a warning.
void kill(SimulationState& state, Pid pid, Tick tick);

// Per-process outcome table of a (finished or partial) simulation.
std::vector<ProcessRecord> process_records(const SimulationState& state);

// Files a scenario's damaging processes modify if nothing is ever killed.
std::map<std::string, double> unkilled_damage(const Scenario& scenario);

// Online scorer: sees snapshots of each process in tick order and returns a
// maliciousness score.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual double score(const ProcessSnapshot& snapshot) = 0;
  virtual void forget(Pid) {}
  virtual void reset() {}
};

struct RunResult {
  std::string scenario_id;
  std::vector<SimEvent> log;
  std::vector<ProcessRecord> records;
  std::map<std::string, double> files_modified;
  std::map<std::string, double> files_modified_unkilled;
  std::vector<std::string> warnings;

  double total_files_modified() const;
  double total_files_modified_unkilled() const;
};

// Runs the scenario to completion with the detector in the loop: every tick,
// score all fresh snapshots, then kill (with cascade) each process whose
// score exceeds the threshold.
RunResult run_with_detector(const Scenario& scenario, Detector& detector, double threshold);

// Scores of every process over its unkilled lifetime. Because a process's
// score depends only on its own history, killing can be replayed from these
// for any threshold without rerunning the detector.
struct ScoredProcess {
  Pid pid = 0;
  std::optional<Pid> parent;
  std::string app_id;
  Label label = Label::kBenign;
  Tick birth = 0;
  Tick end = 0;
  bool damaging = false;
  std::vector<double> scores;  // scores[k] belongs to tick birth + 1 + k
};

struct ScoredScenario {
  std::string id;
  std::vector<ScoredProcess> processes;  // parents precede children
  std::map<std::string, DamageSpec> damage;  // by app_id
};

ScoredScenario score_scenario(const Scenario& scenario, Detector& detector);

// Kill outcome of every process at the given threshold, cascade included.
std::vector<ProcessRecord> replay_kills(const ScoredScenario& scored, double threshold);

// Files modified per app for a replayed outcome.
std::map<std::string, double> replay_damage(const ScoredScenario& scored, std::span<const ProcessRecord> records);

std::string serialize_event_log(const RunResult& run);

}  // namespace procguard
