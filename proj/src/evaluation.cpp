#include "procguard/evaluation.hpp"

#include <cstdio>

#include "procguard/detectors.hpp"
#include "procguard/error.hpp"

namespace procguard {

std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, Detector& detector) {
  std::vector<ScoredScenario> out;
  out.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    detector.reset();
    out.push_back(score_scenario(s, detector));
  }
  return out;
}

std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, const GruClassifier& model) {
  GruDetector detector(model);
  return score_scenarios(scenarios, detector);
}

std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, const ForestClassifier& forest) {
  ForestDetector detector(forest);
  return score_scenarios(scenarios, detector);
}

EvaluationReport evaluate_online(const std::string& split, const std::string& model,
                                 std::span<const ScoredScenario> scored, double threshold,
                                 Aggregation aggregation) {
  std::vector<ProcessRecord> records;
  for (const auto& s : scored) {
    auto r = replay_kills(s, threshold);
    records.insert(records.end(), r.begin(), r.end());
  }
  return build_report(split, model, std::move(records), aggregation);
}

EvaluationReport evaluate_offline(const std::string& split, const std::string& model, const GruClassifier& gru,
                                  std::span<const Scenario> scenarios, double threshold,
                                  Aggregation aggregation) {
  std::vector<ProcessRecord> records;
  for (const auto& scenario : scenarios) {
    const auto traces = scenario_traces(scenario);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto& plan = scenario.processes[i];
      ProcessRecord r;
      r.scenario_id = scenario.id;
      r.pid = plan.pid;
      r.app_id = plan.app_id;
      r.label = plan.label;
      r.birth = plan.birth;
      r.unkilled_duration = plan.unkilled_duration();
      r.runtime = r.unkilled_duration;
      if (!traces[i].snapshots.empty()) {
        std::vector<double> scores;
        for (const auto& w : make_windows(traces[i], gru.stats, gru.window_size()))
          scores.push_back(gru.predict_window(w.window));
        const auto verdict = offline_verdict(plan.pid, scores, plan.end, threshold);
        if (verdict.decision == Verdict::kMalicious) r.killed_at = verdict.decided_at_tick;
      }
      records.push_back(std::move(r));
    }
  }
  return build_report(split, model, std::move(records), aggregation);
}

Objective offline_objective(std::vector<Scenario> validation) {
  return [validation = std::move(validation)](const GruClassifier& model) {
    const auto report = evaluate_offline("validation", "trial", model, validation, model.threshold);
    return (report.fpr + report.fnr) / 2.0;
  };
}

Objective online_objective(std::vector<Scenario> validation, std::vector<double> grid) {
  return [validation = std::move(validation), grid = std::move(grid)](const GruClassifier& model) {
    const auto scored = score_scenarios(validation, model);
    const auto sweep = threshold_sweep(scored, grid);
    for (const auto& row : sweep.rows)
      if (row.threshold == sweep.best_threshold) return row.combined;
    throw ConfigError("threshold sweep lost its best row");
  };
}

DamageTally damage(std::span<const ScoredScenario> scored, double threshold) {
  DamageTally tally;
  for (const auto& s : scored) {
    const auto records = replay_kills(s, threshold);
    for (const auto& [app, files] : replay_damage(s, records)) tally.with_detector += files;
    for (const auto& [app, files] : replay_damage(s, replay_kills(s, 2.0))) tally.unkilled += files;
  }
  return tally;
}

namespace {

std::string theta_label(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", theta);
  return buf;
}

}  // namespace

std::vector<EvaluationReport> six_model_report(const std::string& split, std::span<const Scenario> scenarios,
                                               const SixModels& m, Aggregation aggregation) {
  if (!m.offline || !m.online || !m.distilled || !m.direct) throw ConfigError("six-model report needs all models");
  std::vector<EvaluationReport> rows;
  const auto offline_scores = score_scenarios(scenarios, *m.offline);
  const auto online_scores = score_scenarios(scenarios, *m.online);
  rows.push_back(evaluate_online(split, "offline model (theta=0.50)", offline_scores, 0.5, aggregation));
  rows.push_back(evaluate_online(split, "offline model (best theta=" + theta_label(m.offline_best_threshold) + ")",
                                 offline_scores, m.offline_best_threshold, aggregation));
  rows.push_back(evaluate_online(split, "online model (theta=0.50)", online_scores, 0.5, aggregation));
  rows.push_back(evaluate_online(split, "online model (best theta=" + theta_label(m.online_best_threshold) + ")",
                                 online_scores, m.online_best_threshold, aggregation));
  rows.push_back(evaluate_online(split, "distilled forest", score_scenarios(scenarios, *m.distilled), 0.5, aggregation));
  rows.push_back(evaluate_online(split, "direct forest", score_scenarios(scenarios, *m.direct), 0.5, aggregation));
  return rows;
}

}  // namespace procguard
