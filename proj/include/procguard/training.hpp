#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "procguard/adam.hpp"
#include "procguard/gru.hpp"
#include "procguard/loss.hpp"
#include "procguard/trace.hpp"

namespace procguard {

struct WindowedSample {
  Window window;
  double label = 0;
  double time_left = 0;
};

// Window ending at rows[end] (inclusive), oldest first; positions before the
// start of the trace are zero rows.
Window window_at(std::span<const FeatureVector> rows, std::size_t end, int window_size);

// Fraction of the unkilled run still ahead at snapshot i, clamped to [0, 1].
double time_left(const ProcessTrace& trace, std::size_t snapshot_index);

std::vector<FeatureVector> normalized_rows(const ProcessTrace& trace, const NormalizationStats& stats);

// One sample per snapshot position of the trace.
std::vector<WindowedSample> make_windows(const ProcessTrace& trace, const NormalizationStats& stats,
                                         int window_size);

struct TrainingOptions {
  AdamConfig adam;
  // Windows drawn per class, without replacement. 0 means the smaller class size.
  std::size_t per_class_cap = 0;
  RoundGradient round_gradient = RoundGradient::kStraightThrough;
  double false_positive_cost = 1.0;
};

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean per-sample loss seen during each epoch
  std::size_t windows_per_class = 0;
};

// Trains a fresh model on the traces. Normalisation stats come from these
// traces only. Throws InputError when either class is absent.
GruClassifier train(std::span<const ProcessTrace> traces, const Hyperparameters& hp,
                    const TrainingOptions& options = {}, TrainingLog* log = nullptr);

// Random hyperparameter search. The objective is minimised; ties keep the
// earlier trial.
using Objective = std::function<double(const GruClassifier&)>;

struct SearchTrial {
  std::size_t index = 0;
  Hyperparameters hyper;
  double objective = 0;
};

struct SearchResult {
  std::vector<SearchTrial> trials;
  std::size_t best_index = 0;
  GruClassifier best_model;
};

struct SearchOptions {
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kMse;
  LossVariant loss_variant = LossVariant::kDefault;
  TrainingOptions training;
};

Hyperparameters sample_hyperparameters(const SearchSpace& space, std::mt19937_64& rng);

SearchResult random_search(const SearchSpace& space, int n_trials, std::span<const ProcessTrace> train_split,
                           const Objective& objective, const SearchOptions& options = {});

}  // namespace procguard
