#include "procguard/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "procguard/decision.hpp"
#include "procguard/error.hpp"
#include "procguard/training.hpp"

namespace procguard {

std::vector<LabeledSnapshot> teacher_label(const GruClassifier& teacher, std::span<const ProcessTrace> traces,
                                           std::size_t stride) {
  if (stride == 0) throw ConfigError("position stride must be at least 1");
  std::vector<LabeledSnapshot> out;
  for (const auto& trace : traces) {
    const auto rows = normalized_rows(trace, teacher.stats);
    for (std::size_t i = 0; i < rows.size(); i += stride) {
      const double score = teacher.predict_window(window_at(rows, i, teacher.window_size()));
      out.push_back({trace.snapshots[i].features, exceeds(score, teacher.threshold) ? 1 : 0});
    }
  }
  return out;
}

std::vector<LabeledSnapshot> ground_truth_label(std::span<const ProcessTrace> traces) {
  std::vector<LabeledSnapshot> out;
  for (const auto& trace : traces)
    for (const auto& s : trace.snapshots) out.push_back({s.features, as_int(trace.label)});
  return out;
}

double agreement(const ForestClassifier& forest, std::span<const LabeledSnapshot> rows) {
  if (rows.empty()) return 0.0;
  std::size_t same = 0;
  for (const auto& row : rows) same += forest.predict(row.features) == row.label ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(rows.size());
}

namespace {

std::size_t positives(std::span<const LabeledSnapshot> rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += static_cast<std::size_t>(r.label);
  return n;
}

}  // namespace

ForestClassifier distill(const GruClassifier& teacher, std::span<const ProcessTrace> traces,
                         const DistillConfig& config, DistillReport* report) {
  if (traces.empty()) throw InputError("no traces to distill from");
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0))
    throw ConfigError("hold-out fraction must lie in [0, 1)");

  // Hold out whole traces so no process leaks snapshots into both sides.
  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(traces.size())));
  if (n_holdout >= traces.size()) n_holdout = traces.size() - 1;
  std::vector<ProcessTrace> train_traces, holdout_traces;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_holdout ? holdout_traces : train_traces).push_back(traces[order[i]]);

  const auto train_rows = teacher_label(teacher, train_traces, config.position_stride);
  if (train_rows.empty()) throw InputError("no snapshots to distill from");
  ForestConfig forest_config = config.forest;
  forest_config.allow_single_class = true;
  ForestClassifier student = train_forest(train_rows, forest_config);

  if (report) {
    const auto holdout_rows = teacher_label(teacher, holdout_traces);
    report->train_rows = train_rows.size();
    report->train_positive = positives(train_rows);
    report->holdout_rows = holdout_rows.size();
    report->holdout_positive = positives(holdout_rows);
    report->holdout_agreement = agreement(student, holdout_rows);
    report->train_agreement = agreement(student, train_rows);
  }
  return student;
}

ForestClassifier train_forest_direct(std::span<const ProcessTrace> traces, const ForestConfig& config) {
  const auto rows = ground_truth_label(traces);
  ForestConfig strict = config;
  strict.allow_single_class = false;
  return train_forest(rows, strict);
}

}  // namespace procguard
