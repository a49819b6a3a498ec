#pragma once

#include <unordered_map>
#include <vector>

#include "procguard/forest.hpp"
#include "procguard/gru.hpp"
#include "procguard/simulator.hpp"

namespace procguard {

// Keeps the last window_size normalized rows per pid and scores the window
// ending at the newest one.
class GruDetector : public Detector {
 public:
  explicit GruDetector(const GruClassifier& model) : model_(model) {}

  double score(const ProcessSnapshot& snapshot) override;
  void forget(Pid pid) override { history_.erase(pid); }
  void reset() override { history_.clear(); }

 private:
  const GruClassifier& model_;
  std::unordered_map<Pid, std::vector<FeatureVector>> history_;
};

// Stateless: the vote on the raw newest snapshot, as 0 or 1.
class ForestDetector : public Detector {
 public:
  explicit ForestDetector(const ForestClassifier& forest) : forest_(forest) {}

  double score(const ProcessSnapshot& snapshot) override { return forest_.predict(snapshot.features); }

 private:
  const ForestClassifier& forest_;
};

}  // namespace procguard
