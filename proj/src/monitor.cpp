#include "procguard/monitor.hpp"

#include <signal.h>
#include <sys/resource.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "procguard/decision.hpp"
#include "procguard/error.hpp"

namespace procguard {

bool SignalKiller::terminate(Pid pid, std::string& error) {
  if (::kill(static_cast<pid_t>(pid), SIGKILL) == 0) return true;
  error = std::strerror(errno);
  return false;
}

Allowlist parse_allowlist(const std::string& text) {
  Allowlist list;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string entry = line.substr(first, last - first + 1);
    if (entry.find_first_not_of("0123456789") == std::string::npos)
      list.pids.insert(std::stoll(entry));
    else
      list.names.insert(entry);
  }
  return list;
}

Allowlist load_allowlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read allowlist " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_allowlist(ss.str());
}

double MonitorSummary::mean_interval() const {
  if (sample_seconds.size() < 2) return 0.0;
  return (sample_seconds.back() - sample_seconds.front()) / static_cast<double>(sample_seconds.size() - 1);
}

namespace {

std::string process_name(const std::filesystem::path& proc_root, Pid pid) {
  std::ifstream in(proc_root / std::to_string(pid) / "comm");
  std::string name;
  std::getline(in, name);
  return name;
}

struct EventSink {
  std::ostream* out;
  void emit(const nlohmann::ordered_json& j) {
    if (out) *out << j.dump() << '\n';
  }
};

}  // namespace

MonitorSummary run_monitor(const MonitorOptions& options, Detector& detector, ProcessKiller& killer,
                           std::ostream& out, std::ostream* events, const std::atomic<bool>* stop) {
  if (options.interval.count() <= 0) throw ConfigError("sampling interval must be positive");
  if (options.max_ticks < 0) throw ConfigError("tick limit must not be negative");
  const Pid self = options.self_pid != 0 ? options.self_pid : static_cast<Pid>(::getpid());
  MonitorSummary summary;
  EventSink sink{events};

  if (options.request_high_priority && ::setpriority(PRIO_PROCESS, 0, -10) != 0) {
    summary.warnings.push_back(std::string("high scheduling priority denied: ") + std::strerror(errno));
    sink.emit({{"event", "warning"}, {"message", summary.warnings.back()}});
  }

  SamplerState state;
  std::set<Pid> decided;
  const auto start = std::chrono::steady_clock::now();
  auto deadline = start;
  while (options.max_ticks == 0 || summary.ticks < options.max_ticks) {
    if (stop && stop->load()) break;
    std::this_thread::sleep_until(deadline);
    const double at = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    summary.sample_seconds.push_back(at);
    state.warnings.clear();
    const auto snapshots = sample_processes(state, options.sampler);
    const Tick tick = state.tick;
    ++summary.ticks;
    for (const auto& w : state.warnings) sink.emit({{"event", "warning"}, {"tick", tick}, {"message", w}});
    for (Pid gone : state.terminated) {
      detector.forget(gone);
      decided.erase(gone);
    }

    std::map<Pid, std::vector<Pid>> children;
    for (const auto& s : snapshots)
      if (s.parent_id) children[*s.parent_id].push_back(s.process_id);
    auto subtree = [&](Pid root) {
      std::vector<Pid> order{root};
      for (std::size_t i = 0; i < order.size(); ++i)
        if (auto it = children.find(order[i]); it != children.end())
          order.insert(order.end(), it->second.begin(), it->second.end());
      return order;
    };
    std::set<Pid> scope;
    if (options.scope_pid)
      for (Pid p : subtree(*options.scope_pid)) scope.insert(p);

    sink.emit({{"event", "sample"}, {"tick", tick}, {"t", at}, {"processes", snapshots.size()}});

    // Score everything first; act only once the whole sweep is scored.
    std::vector<Pid> flagged;
    for (const auto& s : snapshots) {
      if (options.scope_pid && !scope.count(s.process_id)) continue;
      const double score = detector.score(s);
      if (exceeds(score, options.threshold) && !decided.count(s.process_id)) {
        flagged.push_back(s.process_id);
        sink.emit({{"event", "verdict"}, {"tick", tick}, {"pid", s.process_id}, {"score", score}});
      }
    }

    for (Pid root : flagged) {
      if (decided.count(root)) continue;  // already handled by an earlier cascade
      for (Pid pid : subtree(root)) {
        if (decided.count(pid)) continue;
        const char* trigger = pid == root ? "direct" : "cascade";
        const char* reason = nullptr;
        if (pid == self)
          reason = "self";
        else if (pid <= 1)
          reason = "init";
        else if (options.allowlist.pids.count(pid) ||
                 (!options.allowlist.names.empty() &&
                  options.allowlist.names.count(process_name(options.sampler.proc_root, pid))))
          reason = "allowlist";
        decided.insert(pid);
        if (reason) {
          ++summary.skipped;
          out << "tick " << tick << ": exempt pid " << pid << " (" << reason << ")\n";
          sink.emit({{"event", "exempt"}, {"tick", tick}, {"pid", pid}, {"reason", reason}});
          continue;
        }
        if (!options.enforce) {
          ++summary.would_kill;
          out << "tick " << tick << ": would kill pid " << pid << "\n";
          sink.emit({{"event", "would_kill"}, {"tick", tick}, {"pid", pid}, {"trigger", trigger}});
          continue;
        }
        std::string error;
        if (killer.terminate(pid, error)) {
          ++summary.kills;
          out << "tick " << tick << ": killed pid " << pid << "\n";
          sink.emit({{"event", "kill"}, {"tick", tick}, {"pid", pid}, {"trigger", trigger}});
        } else {
          ++summary.kill_failures;
          summary.warnings.push_back("kill " + std::to_string(pid) + " failed: " + error);
          sink.emit({{"event", "warning"}, {"tick", tick}, {"message", summary.warnings.back()}});
        }
      }
    }
    if (events) events->flush();
    deadline += options.interval;
    // After a long stall, resume the cadence instead of bursting to catch up.
    const auto now = std::chrono::steady_clock::now();
    if (deadline < now) deadline = now;
  }
  return summary;
}

}  // namespace procguard
