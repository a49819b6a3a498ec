#pragma once

#include <atomic>
#include <chrono>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "procguard/sampler.hpp"
#include "procguard/simulator.hpp"

namespace procguard {

// Sends the termination. Returns false and fills `error` on failure.
class ProcessKiller {
 public:
  virtual ~ProcessKiller() = default;
  virtual bool terminate(Pid pid, std::string& error) = 0;
};

// SIGKILL through kill(2).
class SignalKiller : public ProcessKiller {
 public:
  bool terminate(Pid pid, std::string& error) override;
};

struct Allowlist {
  std::set<Pid> pids;
  std::set<std::string> names;  // matched against /proc/<pid>/comm

  bool empty() const { return pids.empty() && names.empty(); }
};

// One entry per line: a pid, or a process name. '#' starts a comment.
Allowlist parse_allowlist(const std::string& text);
Allowlist load_allowlist(const std::string& path);

struct MonitorOptions {
  SamplerOptions sampler;
  std::chrono::milliseconds interval{1000};
  std::int64_t max_ticks = 0;  // 0 runs until `stop` is raised
  double threshold = 0.5;
  bool enforce = false;
  Allowlist allowlist;
  std::optional<Pid> scope_pid;  // only this process and its descendants
  Pid self_pid = 0;              // 0 means getpid()
  bool request_high_priority = true;
};

struct MonitorSummary {
  std::int64_t ticks = 0;
  std::vector<double> sample_seconds;  // start of each sweep since the monitor began
  std::size_t kills = 0;
  std::size_t would_kill = 0;
  std::size_t skipped = 0;  // flagged but exempt
  std::size_t kill_failures = 0;
  std::vector<std::string> warnings;

  // Mean spacing of consecutive sweeps, 0 with fewer than two.
  double mean_interval() const;
};

// 1 Hz loop: sweep, score every in-scope process, then act on new malicious
// verdicts (with cascade) before the next sweep begins. Without enforce the
// kills are only reported as "would kill pid N". Human-readable lines go to
// `out`; one JSON event per line goes to `events` when given.
MonitorSummary run_monitor(const MonitorOptions& options, Detector& detector, ProcessKiller& killer,
                           std::ostream& out, std::ostream* events = nullptr,
                           const std::atomic<bool>* stop = nullptr);

}  // namespace procguard
