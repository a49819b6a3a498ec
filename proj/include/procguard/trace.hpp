#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "procguard/features.hpp"

namespace procguard {

using Pid = std::int64_t;
using Tick = std::int64_t;

enum class Label : std::uint8_t { kBenign = 0, kMalicious = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

inline int as_int(Label label) { return label == Label::kMalicious ? 1 : 0; }

struct ProcessSnapshot {
  Pid process_id = 0;
  std::optional<Pid> parent_id;
  std::string app_id;
  Tick tick = 0;
  FeatureVector features{};

  bool operator==(const ProcessSnapshot&) const = default;
};

// All snapshots of one process, oldest first. Labels are inherited from the
// owning application.
struct ProcessTrace {
  Pid process_id = 0;
  std::optional<Pid> parent_id;
  std::string app_id;
  Label label = Label::kBenign;
  std::vector<ProcessSnapshot> snapshots;
  // Seconds the process runs if never killed.
  Tick unkilled_duration_s = 0;

  // Tick at which the process came into existence. The first snapshot is
  // taken one tick after birth.
  Tick birth_tick() const {
    return snapshots.empty() ? 0 : snapshots.front().tick - 1;
  }

  bool operator==(const ProcessTrace&) const = default;
};

// Throws InputError when a trace breaks its invariants (tick order, label
// constancy, duration bound, parent != self).
void validate_trace(const ProcessTrace& trace);

}  // namespace procguard
