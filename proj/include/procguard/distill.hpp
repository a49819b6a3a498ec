#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "procguard/forest.hpp"
#include "procguard/gru.hpp"
#include "procguard/trace.hpp"

namespace procguard {

// One row per window position of every trace: the raw features of the
// window's newest snapshot, labelled with the teacher's thresholded decision.
// `stride` keeps every stride-th position (1 keeps all of them).
std::vector<LabeledSnapshot> teacher_label(const GruClassifier& teacher, std::span<const ProcessTrace> traces,
                                           std::size_t stride = 1);

// Raw snapshots labelled with their application's ground truth.
std::vector<LabeledSnapshot> ground_truth_label(std::span<const ProcessTrace> traces);

// Share of rows on which the forest reproduces the label. 0 for no rows.
double agreement(const ForestClassifier& forest, std::span<const LabeledSnapshot> rows);

struct DistillConfig {
  ForestConfig forest;
  // Fraction of traces (not snapshots) kept out of training for the
  // agreement check. 0 disables the hold-out.
  double holdout_fraction = 0.2;
  std::size_t position_stride = 1;
  std::uint64_t split_seed = 0;
};

struct DistillReport {
  std::size_t train_rows = 0;
  std::size_t train_positive = 0;
  std::size_t holdout_rows = 0;
  std::size_t holdout_positive = 0;
  double holdout_agreement = 0;
  double train_agreement = 0;
};

// A teacher that never fires is legal: the student then predicts 0
// everywhere.
ForestClassifier distill(const GruClassifier& teacher, std::span<const ProcessTrace> traces,
                         const DistillConfig& config = {}, DistillReport* report = nullptr);

// Baseline forest on ground-truth labels. Single-class data is an error.
ForestClassifier train_forest_direct(std::span<const ProcessTrace> traces, const ForestConfig& config = {});

}  // namespace procguard
