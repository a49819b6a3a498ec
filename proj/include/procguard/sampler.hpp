#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "procguard/trace.hpp"

namespace procguard {

// Raw cumulative counters remembered between sweeps for delta reporting.
struct CounterSample {
  double cpu_system_ticks = 0;
  double cpu_user_ticks = 0;
  double io_read_bytes = 0;
  double io_write_bytes = 0;
  double io_other_bytes = 0;
  double io_read_count = 0;
  double io_write_count = 0;
  double io_other_count = 0;
  double tcp_packets = 0;
  double udp_packets = 0;
  double wall_seconds = 0;
  unsigned long long start_time = 0;  // distinguishes reused pids
};

// Sampler memory carried from one sweep to the next. One per host.
struct SamplerState {
  Tick tick = -1;
  std::map<Pid, CounterSample> previous;
  std::set<Pid> terminated;  // pids seen last sweep but gone now
  std::vector<std::string> warnings;
};

struct SamplerOptions {
  std::filesystem::path proc_root = "/proc";
  std::string app_id = "host";
};

// One sweep over every visible process. Advances state.tick by one. Delta
// features report 0 on the first observation of a process. Processes that
// cannot be read are skipped with a warning in state.warnings.
// Throws SamplerError only when the process table itself is unreadable.
std::vector<ProcessSnapshot> sample_processes(SamplerState& state,
                                              const SamplerOptions& options = {});

}  // namespace procguard
