#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace procguard {

inline constexpr std::size_t kFeatureCount = 26;

using FeatureVector = std::array<double, kFeatureCount>;

// Normative column order of the feature array. See data/feature_schema.md.
enum class Feature : std::size_t {
  kCpuSystemPct = 0,
  kCpuUserPct,
  kMemTotalBytes,
  kMemPhysicalBytes,
  kMemSwapBytes,
  kChildProcessCount,
  kMaxChildProcessId,
  kThreadCount,
  kIoReadBytes,
  kIoWriteBytes,
  kIoOtherBytes,
  kIoReadCount,
  kIoWriteCount,
  kIoOtherCount,
  kProcessPriority,
  kIoPriority,
  kCmdlineArgCount,
  kHandleCount,
  kSecondsSinceStart,
  kTcpPacketCount,
  kUdpPacketCount,
  kOpenConnectionCount,
  kPortStatusListen,
  kPortStatusEstablished,
  kPortStatusWait,
  kPortStatusOther,
};

constexpr std::size_t index(Feature f) { return static_cast<std::size_t>(f); }

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "cpu_system_pct",      "cpu_user_pct",         "mem_total_bytes",
    "mem_physical_bytes",  "mem_swap_bytes",       "child_process_count",
    "max_process_id",      "thread_count",         "io_read_bytes",
    "io_write_bytes",      "io_other_bytes",       "io_read_count",
    "io_write_count",      "io_other_count",       "process_priority",
    "io_priority",         "cmdline_arg_count",    "handle_count",
    "seconds_since_start", "tcp_packet_count",     "udp_packet_count",
    "open_connection_count", "port_status_listen", "port_status_established",
    "port_status_wait",    "port_status_other",
};

// Counter-like fields that are stored as per-tick deltas.
inline constexpr std::array<Feature, 8> kDeltaFeatures = {
    Feature::kIoReadBytes,  Feature::kIoWriteBytes,  Feature::kIoOtherBytes,
    Feature::kIoReadCount,  Feature::kIoWriteCount,  Feature::kIoOtherCount,
    Feature::kTcpPacketCount, Feature::kUdpPacketCount,
};

// True when every entry is finite and every non-priority field is >= 0.
bool features_valid(const FeatureVector& v);

}  // namespace procguard
