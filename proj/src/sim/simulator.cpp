#include "procguard/simulator.hpp"

#include <algorithm>
#include <json.hpp>

#include "procguard/decision.hpp"
#include "procguard/error.hpp"

namespace procguard {

bool SimulationState::running(const ProcessNode& n, Tick tick) const {
  return n.spawned && !n.killed_at && n.birth <= tick && tick < n.scheduled_end;
}

SimulationState start_simulation(const Scenario& scenario) {
  SimulationState state;
  state.scenario = &scenario;
  state.nodes.reserve(scenario.processes.size());
  for (std::size_t i = 0; i < scenario.processes.size(); ++i) {
    const auto& p = scenario.processes[i];
    state.by_pid[p.pid] = i;
    if (p.parent) state.children[*p.parent].push_back(p.pid);
    state.nodes.push_back({p.pid, p.parent, i, p.birth, p.end, false, std::nullopt});
  }
  for (const auto& a : scenario.apps)
    if (a.damage) state.files_modified[a.app_id] = 0.0;
  for (auto& n : state.nodes)
    if (n.birth == 0) {
      n.spawned = true;
      state.log.push_back({0, EventKind::kSpawn, n.pid, KillTrigger::kNone});
    }
  return state;
}

std::vector<ProcessSnapshot> step(SimulationState& state) {
  const Scenario& scenario = *state.scenario;
  const Tick now = state.clock;

  for (const auto& n : state.nodes) {
    const auto& plan = scenario.processes[n.plan];
    if (!plan.damaging || !state.running(n, now)) continue;
    const AppRecord* app = scenario.find_app(plan.app_id);
    if (app && app->damage && now - n.birth >= app->damage->onset_delay_s)
      state.files_modified[plan.app_id] += app->damage->files_per_second;
  }

  const Tick next = now + 1;
  state.clock = next;
  std::vector<ProcessSnapshot> snapshots;
  for (auto& n : state.nodes) {
    if (n.killed_at) continue;
    if (n.spawned && n.birth < next && next <= n.scheduled_end) {
      const auto& plan = scenario.processes[n.plan];
      snapshots.push_back({n.pid, n.parent, plan.app_id, next,
                           plan.features[static_cast<std::size_t>(next - n.birth - 1)]});
      state.log.push_back({next, EventKind::kSnapshot, n.pid, KillTrigger::kNone});
      if (next == n.scheduled_end) state.log.push_back({next, EventKind::kExit, n.pid, KillTrigger::kNone});
    }
  }
  for (auto& n : state.nodes)
    if (!n.spawned && !n.killed_at && n.birth == next) {
      n.spawned = true;
      state.log.push_back({next, EventKind::kSpawn, n.pid, KillTrigger::kNone});
    }
  return snapshots;
}

void kill(SimulationState& state, Pid pid, Tick tick) {
  auto it = state.by_pid.find(pid);
  if (it == state.by_pid.end()) {
    state.warnings.push_back("kill of unknown pid " + std::to_string(pid) + " ignored");
    return;
  }
  ProcessNode& target = state.nodes[it->second];
  if (!state.running(target, tick)) {
    state.warnings.push_back("kill of pid " + std::to_string(pid) + " at tick " + std::to_string(tick) +
                             " ignored: not running");
    return;
  }
  target.killed_at = tick;
  state.log.push_back({tick, EventKind::kKill, pid, KillTrigger::kDirect});

  std::vector<Pid> pending;
  if (auto c = state.children.find(pid); c != state.children.end()) pending = c->second;
  while (!pending.empty()) {
    const Pid child = pending.back();
    pending.pop_back();
    ProcessNode& n = state.nodes[state.by_pid.at(child)];
    if (n.killed_at) continue;  // its subtree went with it
    // An exited child is not killed, but its live descendants still are.
    if (tick < n.scheduled_end) {
      n.killed_at = tick;
      state.log.push_back({tick, EventKind::kKill, child, KillTrigger::kCascade});
    }
    if (auto c = state.children.find(child); c != state.children.end())
      pending.insert(pending.end(), c->second.begin(), c->second.end());
  }
}

std::vector<ProcessRecord> process_records(const SimulationState& state) {
  std::vector<ProcessRecord> records;
  records.reserve(state.nodes.size());
  for (const auto& n : state.nodes) {
    const auto& plan = state.scenario->processes[n.plan];
    ProcessRecord r;
    r.scenario_id = state.scenario->id;
    r.pid = n.pid;
    r.app_id = plan.app_id;
    r.label = plan.label;
    r.birth = n.birth;
    r.unkilled_duration = plan.unkilled_duration();
    r.killed_at = n.killed_at;
    const Tick stop = n.killed_at ? std::min(*n.killed_at, n.scheduled_end) : n.scheduled_end;
    r.runtime = std::clamp(stop - n.birth, Tick{0}, r.unkilled_duration);
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

double damage_for(const ProcessPlan& plan, Tick runtime, const std::optional<DamageSpec>& damage) {
  if (!plan.damaging || !damage) return 0.0;
  const Tick effective = std::max(Tick{0}, runtime - damage->onset_delay_s);
  return static_cast<double>(effective) * damage->files_per_second;
}

}  // namespace

std::map<std::string, double> unkilled_damage(const Scenario& scenario) {
  std::map<std::string, double> out;
  for (const auto& a : scenario.apps)
    if (a.damage) out[a.app_id] = 0.0;
  for (const auto& p : scenario.processes) {
    const AppRecord* app = scenario.find_app(p.app_id);
    if (app && app->damage) out[p.app_id] += damage_for(p, p.unkilled_duration(), app->damage);
  }
  return out;
}

double RunResult::total_files_modified() const {
  double sum = 0;
  for (const auto& [app, files] : files_modified) sum += files;
  return sum;
}

double RunResult::total_files_modified_unkilled() const {
  double sum = 0;
  for (const auto& [app, files] : files_modified_unkilled) sum += files;
  return sum;
}

RunResult run_with_detector(const Scenario& scenario, Detector& detector, double threshold) {
  detector.reset();
  SimulationState state = start_simulation(scenario);
  while (state.clock < scenario.config.duration_s) {
    const auto snapshots = step(state);
    std::vector<Pid> flagged;
    for (const auto& snap : snapshots)
      if (exceeds(detector.score(snap), threshold)) flagged.push_back(snap.process_id);
    // Every verdict for this tick is in before any kill is applied.
    for (Pid pid : flagged) {
      const ProcessNode& n = state.nodes[state.by_pid.at(pid)];
      // Already cascaded this tick, or the snapshot was its last before exiting.
      if (!state.running(n, state.clock)) continue;
      kill(state, pid, state.clock);
    }
    for (const auto& n : state.nodes)
      if (n.killed_at && *n.killed_at == state.clock) detector.forget(n.pid);
  }
  RunResult result;
  result.scenario_id = scenario.id;
  result.log = std::move(state.log);
  result.files_modified = state.files_modified;
  result.files_modified_unkilled = unkilled_damage(scenario);
  result.warnings = state.warnings;
  result.records = process_records(state);
  return result;
}

ScoredScenario score_scenario(const Scenario& scenario, Detector& detector) {
  detector.reset();
  ScoredScenario scored;
  scored.id = scenario.id;
  for (const auto& a : scenario.apps)
    if (a.damage) scored.damage[a.app_id] = *a.damage;
  for (const auto& p : scenario.processes) {
    ScoredProcess sp{p.pid, p.parent, p.app_id, p.label, p.birth, p.end, p.damaging, {}};
    sp.scores.reserve(p.features.size());
    scored.processes.push_back(std::move(sp));
  }
  // Feed snapshots in global tick order, exactly as a live run would.
  SimulationState state = start_simulation(scenario);
  while (state.clock < scenario.config.duration_s) {
    for (const auto& snap : step(state)) {
      const auto idx = state.by_pid.at(snap.process_id);
      scored.processes[idx].scores.push_back(detector.score(snap));
    }
  }
  return scored;
}

std::vector<ProcessRecord> replay_kills(const ScoredScenario& scored, double threshold) {
  std::unordered_map<Pid, std::size_t> index_of;
  // Earliest kill of the process or any ancestor, applied or not: a cascade
  // passes through processes that had already exited.
  std::vector<std::optional<Tick>> reach(scored.processes.size());
  std::vector<ProcessRecord> records;
  records.reserve(scored.processes.size());
  for (std::size_t i = 0; i < scored.processes.size(); ++i) {
    const auto& p = scored.processes[i];
    index_of[p.pid] = i;
    std::optional<Tick> kill_tick;
    for (std::size_t k = 0; k < p.scores.size(); ++k) {
      if (!exceeds(p.scores[k], threshold)) continue;
      const Tick tick = p.birth + 1 + static_cast<Tick>(k);
      // A verdict on the final snapshot arrives after the natural exit.
      if (tick < p.end) kill_tick = tick;
      break;
    }
    std::optional<Tick> inherited;
    if (p.parent)
      if (auto it = index_of.find(*p.parent); it != index_of.end()) inherited = reach[it->second];
    if (inherited && *inherited < p.end && (!kill_tick || *inherited < *kill_tick)) kill_tick = inherited;
    reach[i] = kill_tick;
    if (inherited && (!reach[i] || *inherited < *reach[i])) reach[i] = inherited;
    ProcessRecord r;
    r.scenario_id = scored.id;
    r.pid = p.pid;
    r.app_id = p.app_id;
    r.label = p.label;
    r.birth = p.birth;
    r.unkilled_duration = p.end - p.birth;
    r.killed_at = kill_tick;
    const Tick stop = kill_tick ? std::min(*kill_tick, p.end) : p.end;
    r.runtime = std::clamp(stop - p.birth, Tick{0}, r.unkilled_duration);
    records.push_back(std::move(r));
  }
  return records;
}

std::map<std::string, double> replay_damage(const ScoredScenario& scored, std::span<const ProcessRecord> records) {
  std::map<std::string, double> out;
  for (const auto& [app, spec] : scored.damage) out[app] = 0.0;
  for (std::size_t i = 0; i < scored.processes.size() && i < records.size(); ++i) {
    const auto& p = scored.processes[i];
    auto it = scored.damage.find(p.app_id);
    if (!p.damaging || it == scored.damage.end()) continue;
    const Tick effective = std::max(Tick{0}, records[i].runtime - it->second.onset_delay_s);
    out[p.app_id] += static_cast<double>(effective) * it->second.files_per_second;
  }
  return out;
}

std::string serialize_event_log(const RunResult& run) {
  static constexpr const char* kKinds[] = {"spawn", "snapshot", "exit", "kill"};
  static constexpr const char* kTriggers[] = {"none", "direct", "cascade"};
  std::string out;
  for (const auto& e : run.log) {
    nlohmann::ordered_json j;
    j["scenario"] = run.scenario_id;
    j["tick"] = e.tick;
    j["event"] = kKinds[static_cast<int>(e.kind)];
    j["pid"] = e.pid;
    if (e.kind == EventKind::kKill) j["trigger"] = kTriggers[static_cast<int>(e.trigger)];
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace procguard
