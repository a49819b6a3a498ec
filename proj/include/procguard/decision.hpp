#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "procguard/simulator.hpp"
#include "procguard/trace.hpp"

namespace procguard {

enum class Verdict : std::uint8_t { kBenign, kMalicious };
enum class VerdictTrigger : std::uint8_t { kOfflineMean, kOnlineSingleWindow };

struct ProcessVerdict {
  Pid process_id = 0;
  Verdict decision = Verdict::kBenign;
  Tick decided_at_tick = 0;
  VerdictTrigger trigger = VerdictTrigger::kOfflineMean;
};

// The one place the boundary convention lives: strictly greater than.
inline bool exceeds(double score, double threshold) { return score > threshold; }

// Malicious iff the mean window score exceeds the threshold. Throws
// ConfigError for an empty score list.
ProcessVerdict offline_verdict(Pid pid, std::span<const double> scores, Tick final_tick, double threshold);

struct TickScore {
  Tick tick = 0;
  double score = 0;
};

// First tick whose score exceeds the threshold, if any.
std::optional<ProcessVerdict> online_verdict(Pid pid, std::span<const TickScore> stream, double threshold);

struct SweepRow {
  double threshold = 0;
  double fpr = 0;
  double fnr_over_time = 0;
  double combined = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_threshold = 0;
};

// `steps` evenly spaced thresholds from lo to hi inclusive.
std::vector<double> threshold_grid(int steps = 51, double lo = 0.5, double hi = 1.0);

// Replays killing on the validation scenarios for each threshold and picks
// the one minimising (FPR + FNR over time) / 2; ties go to the larger
// threshold.
SweepResult threshold_sweep(std::span<const ScoredScenario> validation, std::span<const double> grid);

void write_sweep_csv(const SweepResult& sweep, std::ostream& out);

}  // namespace procguard
