#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "procguard/trace.hpp"

namespace procguard {

// Line-delimited trace records, one snapshot per line:
//   {"app_id":..,"pid":..,"ppid":..|null,"tick":..,"label":"benign"|"malicious","f":[26 numbers]}
// Reading groups records by (app_id, pid) and sorts each group by tick.
// unkilled_duration_s of a read trace is its observed span (last - first + 1);
// callers that know the true duration overwrite it from the sidecar.

std::string format_snapshot_record(const ProcessSnapshot& snapshot, Label label);

void write_traces(std::span<const ProcessTrace> traces, std::ostream& out);
void write_traces(std::span<const ProcessTrace> traces,
                  const std::filesystem::path& path);

std::vector<ProcessTrace> read_traces(std::istream& in);
std::vector<ProcessTrace> read_traces(const std::filesystem::path& path);

}  // namespace procguard
