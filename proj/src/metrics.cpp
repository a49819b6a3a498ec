#include "procguard/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

#include <json.hpp>

namespace procguard {

namespace {

template <class Num, class Den>
Rate ratio_over(std::span<const ProcessRecord> records, Label label, Num numerator, Den denominator) {
  double num = 0, den = 0;
  bool any = false;
  for (const auto& r : records) {
    if (r.label != label) continue;
    any = true;
    num += numerator(r);
    den += denominator(r);
  }
  if (!any || den <= 0) return {0.0, true};
  return {num / den, false};
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

Rate fnr_over_time(std::span<const ProcessRecord> records) {
  return ratio_over(
      records, Label::kMalicious, [](const auto& r) { return static_cast<double>(r.runtime); },
      [](const auto& r) { return static_cast<double>(r.unkilled_duration); });
}

Rate fpr(std::span<const ProcessRecord> records) {
  return ratio_over(
      records, Label::kBenign, [](const auto& r) { return r.killed_at ? 1.0 : 0.0; },
      [](const auto&) { return 1.0; });
}

Rate fnr(std::span<const ProcessRecord> records) {
  return ratio_over(
      records, Label::kMalicious, [](const auto& r) { return r.killed_at ? 0.0 : 1.0; },
      [](const auto&) { return 1.0; });
}

Rate fpr_over_time(std::span<const ProcessRecord> records) {
  return ratio_over(
      records, Label::kBenign,
      [](const auto& r) { return static_cast<double>(r.unkilled_duration - r.runtime); },
      [](const auto& r) { return static_cast<double>(r.unkilled_duration); });
}

double accuracy(std::span<const ProcessRecord> records, Aggregation aggregation) {
  if (records.empty()) return 0.0;
  if (aggregation == Aggregation::kProcess) {
    std::size_t correct = 0;
    for (const auto& r : records)
      if (r.killed_at.has_value() == (r.label == Label::kMalicious)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(records.size());
  }
  // (scenario, app) -> (label, any killed)
  std::map<std::pair<std::string, std::string>, std::pair<Label, bool>> apps;
  for (const auto& r : records) {
    auto& a = apps[{r.scenario_id, r.app_id}];
    a.first = r.label;
    a.second = a.second || r.killed_at.has_value();
  }
  std::size_t correct = 0;
  for (const auto& [key, a] : apps)
    if (a.second == (a.first == Label::kMalicious)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(apps.size());
}

EvaluationReport build_report(const std::string& split, const std::string& model, std::vector<ProcessRecord> records,
                              Aggregation aggregation) {
  EvaluationReport report;
  report.split = split;
  report.model = model;
  const Rate fp = fpr(records);
  const Rate fn = fnr(records);
  const Rate fnt = fnr_over_time(records);
  const Rate fpt = fpr_over_time(records);
  if (fp.empty) report.warnings.push_back("no benign processes in split " + split);
  if (fn.empty) report.warnings.push_back("no malicious processes in split " + split);
  report.accuracy = accuracy(records, aggregation);
  report.fpr = fp.value;
  report.fnr = fn.value;
  report.fnr_over_time = fnt.value;
  report.fpr_over_time = fpt.value;
  report.combined = (report.fpr + report.fnr_over_time) / 2.0;
  report.records = std::move(records);
  return report;
}

void write_report_csv(std::span<const EvaluationReport> reports, std::ostream& out) {
  out << "split,model,accuracy,fpr,fnr,fpr_over_time,fnr_over_time,combined\n";
  for (const auto& r : reports) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.10f,%.10f,%.10f,%.10f,%.10f,%.10f", r.accuracy, r.fpr, r.fnr,
                  r.fpr_over_time, r.fnr_over_time, r.combined);
    out << r.split << ',' << r.model << ',' << buf << '\n';
  }
}

void write_report_table(std::span<const EvaluationReport> reports, std::ostream& out) {
  int width = 34;
  for (const auto& r : reports) width = std::max(width, static_cast<int>(r.model.size()));
  char line[768];
  std::snprintf(line, sizeof line, "%-10s %-4s %-*s %9s %9s %9s %14s %14s %16s\n", "Dataset", "#", width, "Model",
                "Acc.(%)", "FPR(%)", "FNR(%)", "FPR time(%)", "FNR time(%)", "(FPR+FNRt)/2");
  out << line;
  int n = 0;
  std::string last_split;
  for (const auto& r : reports) {
    if (r.split != last_split) {
      n = 0;
      last_split = r.split;
    }
    ++n;
    std::snprintf(line, sizeof line, "%-10s %-4d %-*s %9s %9s %9s %14s %14s %16s\n", r.split.c_str(), n,
                  width, r.model.substr(0, 512).c_str(), percent(r.accuracy).c_str(), percent(r.fpr).c_str(), percent(r.fnr).c_str(),
                  percent(r.fpr_over_time).c_str(), percent(r.fnr_over_time).c_str(), percent(r.combined).c_str());
    out << line;
  }
}

void write_process_details(std::span<const EvaluationReport> reports, std::ostream& out) {
  for (const auto& r : reports)
    for (const auto& p : r.records) {
      nlohmann::ordered_json j;
      j["split"] = r.split;
      j["model"] = r.model;
      j["scenario"] = p.scenario_id;
      j["pid"] = p.pid;
      j["app_id"] = p.app_id;
      j["label"] = std::string(to_string(p.label));
      j["birth"] = p.birth;
      j["unkilled_duration"] = p.unkilled_duration;
      j["runtime"] = p.runtime;
      j["killed_at"] = p.killed_at ? nlohmann::ordered_json(*p.killed_at) : nlohmann::ordered_json(nullptr);
      out << j.dump() << '\n';
    }
}

}  // namespace procguard
