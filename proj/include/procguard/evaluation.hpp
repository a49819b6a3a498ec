#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "procguard/decision.hpp"
#include "procguard/forest.hpp"
#include "procguard/gru.hpp"
#include "procguard/metrics.hpp"
#include "procguard/training.hpp"

namespace procguard {

// Scores each scenario with a fresh detector state.
std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, Detector& detector);
std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, const GruClassifier& model);
std::vector<ScoredScenario> score_scenarios(std::span<const Scenario> scenarios, const ForestClassifier& forest);

// Online evaluation: kill on the first crossing, cascade to descendants.
EvaluationReport evaluate_online(const std::string& split, const std::string& model,
                                 std::span<const ScoredScenario> scored, double threshold,
                                 Aggregation aggregation = Aggregation::kProcess);

// Offline evaluation: one verdict per process from the mean of all its
// window scores, taken after the process finished. Nothing is stopped early,
// so a flagged process keeps its full runtime and killed_at marks the
// verdict tick.
EvaluationReport evaluate_offline(const std::string& split, const std::string& model, const GruClassifier& gru,
                                  std::span<const Scenario> scenarios, double threshold,
                                  Aggregation aggregation = Aggregation::kProcess);

// Search objectives, both minimised. Offline: (FPR + FNR) / 2 of offline
// verdicts at the model's threshold. Online: best (FPR + FNR over time) / 2
// over the grid under replayed killing.
Objective offline_objective(std::vector<Scenario> validation);
Objective online_objective(std::vector<Scenario> validation, std::vector<double> grid);

struct DamageTally {
  double with_detector = 0;
  double unkilled = 0;
  // 1 - with / unkilled; 0 when nothing could be damaged.
  double reduction() const { return unkilled > 0 ? 1.0 - with_detector / unkilled : 0.0; }
};

DamageTally damage(std::span<const ScoredScenario> scored, double threshold);

// The six comparison rows for one split. Every model runs with killing in
// the loop; the two offline rows use the MSE-trained GRU.
struct SixModels {
  const GruClassifier* offline = nullptr;
  double offline_best_threshold = 0.5;
  const GruClassifier* online = nullptr;
  double online_best_threshold = 0.5;
  const ForestClassifier* distilled = nullptr;
  const ForestClassifier* direct = nullptr;
};

std::vector<EvaluationReport> six_model_report(const std::string& split, std::span<const Scenario> scenarios,
                                               const SixModels& models,
                                               Aggregation aggregation = Aggregation::kProcess);

}  // namespace procguard
