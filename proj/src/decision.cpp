#include "procguard/decision.hpp"

#include <cstdio>
#include <ostream>

#include "procguard/error.hpp"
#include "procguard/metrics.hpp"

namespace procguard {

ProcessVerdict offline_verdict(Pid pid, std::span<const double> scores, Tick final_tick, double threshold) {
  if (scores.empty()) throw ConfigError("offline verdict needs at least one window score");
  double sum = 0;
  for (double s : scores) sum += s;
  const double mean = sum / static_cast<double>(scores.size());
  return {pid, exceeds(mean, threshold) ? Verdict::kMalicious : Verdict::kBenign, final_tick,
          VerdictTrigger::kOfflineMean};
}

std::optional<ProcessVerdict> online_verdict(Pid pid, std::span<const TickScore> stream, double threshold) {
  for (const auto& s : stream)
    if (exceeds(s.score, threshold)) return ProcessVerdict{pid, Verdict::kMalicious, s.tick, VerdictTrigger::kOnlineSingleWindow};
  return std::nullopt;
}

std::vector<double> threshold_grid(int steps, double lo, double hi) {
  if (steps < 1) throw ConfigError("threshold grid needs at least one step");
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ConfigError("threshold grid must lie inside [0, 1]");
  std::vector<double> grid;
  if (steps == 1) return {lo};
  for (int i = 0; i < steps; ++i) grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (steps - 1));
  return grid;
}

SweepResult threshold_sweep(std::span<const ScoredScenario> validation, std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("threshold sweep needs a non-empty grid");
  SweepResult result;
  bool have_best = false;
  double best_combined = 0;
  for (double theta : grid) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("threshold outside [0, 1]");
    std::vector<ProcessRecord> records;
    for (const auto& scenario : validation) {
      auto r = replay_kills(scenario, theta);
      records.insert(records.end(), r.begin(), r.end());
    }
    SweepRow row;
    row.threshold = theta;
    row.fpr = fpr(records).value;
    row.fnr_over_time = fnr_over_time(records).value;
    row.combined = (row.fpr + row.fnr_over_time) / 2.0;
    result.rows.push_back(row);
    if (!have_best || row.combined < best_combined ||
        (row.combined == best_combined && theta > result.best_threshold)) {
      have_best = true;
      best_combined = row.combined;
      result.best_threshold = theta;
    }
  }
  return result;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  out << "threshold,fpr,fnr_over_time,combined\n";
  char buf[128];
  for (const auto& r : sweep.rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%.10f,%.10f,%.10f\n", r.threshold, r.fpr, r.fnr_over_time, r.combined);
    out << buf;
  }
}

}  // namespace procguard
