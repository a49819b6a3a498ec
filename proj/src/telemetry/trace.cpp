#include "procguard/trace.hpp"

#include "procguard/error.hpp"

namespace procguard {

std::string_view to_string(Label label) {
  return label == Label::kMalicious ? "malicious" : "benign";
}

Label parse_label(std::string_view text) {
  if (text == "benign") return Label::kBenign;
  if (text == "malicious") return Label::kMalicious;
  throw InputError("unknown label '" + std::string(text) + "'");
}

void validate_trace(const ProcessTrace& trace) {
  const std::string who = "trace " + trace.app_id + "/" + std::to_string(trace.process_id);
  if (trace.parent_id && *trace.parent_id == trace.process_id)
    throw InputError(who + ": parent_id equals process_id");
  for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
    const auto& s = trace.snapshots[i];
    if (s.tick < 0) throw InputError(who + ": negative tick");
    if (s.process_id != trace.process_id || s.app_id != trace.app_id)
      throw InputError(who + ": snapshot identity differs from trace");
    if (i > 0 && s.tick <= trace.snapshots[i - 1].tick)
      throw InputError(who + ": ticks not strictly increasing");
  }
  const auto n = static_cast<Tick>(trace.snapshots.size());
  if (n > 0 && trace.unkilled_duration_s < n - 1)
    throw InputError(who + ": unkilled duration shorter than trace");
}

}  // namespace procguard
