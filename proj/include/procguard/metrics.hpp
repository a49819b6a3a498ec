#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procguard/trace.hpp"

namespace procguard {

// Outcome of one process in a (possibly killed) run.
struct ProcessRecord {
  std::string scenario_id;
  Pid pid = 0;
  std::string app_id;
  Label label = Label::kBenign;
  Tick birth = 0;
  Tick unkilled_duration = 0;  // D: seconds it runs if never killed
  Tick runtime = 0;            // r: seconds it actually ran
  std::optional<Tick> killed_at;

  bool operator==(const ProcessRecord&) const = default;
};

// A rate together with a flag raised when its class was empty (rate = 0).
struct Rate {
  double value = 0;
  bool empty = false;
};

// Executed malicious seconds over unkilled malicious seconds.
Rate fnr_over_time(std::span<const ProcessRecord> records);
// Fraction of benign processes killed, directly or by cascade.
Rate fpr(std::span<const ProcessRecord> records);
// Fraction of malicious processes never killed.
Rate fnr(std::span<const ProcessRecord> records);
// Benign process-seconds destroyed by kills over unkilled benign seconds.
Rate fpr_over_time(std::span<const ProcessRecord> records);

enum class Aggregation { kProcess, kApplication };

// Share of correct kill decisions. At application level an app counts as
// killed when any of its processes was.
double accuracy(std::span<const ProcessRecord> records, Aggregation aggregation = Aggregation::kProcess);

struct EvaluationReport {
  std::string split;
  std::string model;
  double accuracy = 0;
  double fpr = 0;
  double fnr = 0;
  double fpr_over_time = 0;
  double fnr_over_time = 0;
  double combined = 0;  // (fpr + fnr_over_time) / 2
  std::vector<ProcessRecord> records;
  std::vector<std::string> warnings;
};

EvaluationReport build_report(const std::string& split, const std::string& model,
                              std::vector<ProcessRecord> records,
                              Aggregation aggregation = Aggregation::kProcess);

// CSV with fractions in [0, 1]; header first.
void write_report_csv(std::span<const EvaluationReport> reports, std::ostream& out);
// Text table with percentages, one row per report.
void write_report_table(std::span<const EvaluationReport> reports, std::ostream& out);
// One JSON record per process.
void write_process_details(std::span<const EvaluationReport> reports, std::ostream& out);

}  // namespace procguard
