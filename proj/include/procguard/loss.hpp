#pragma once

#include <span>
#include <vector>

#include "procguard/hyperparameters.hpp"

namespace procguard {

// Half-up rounding of a score in [0, 1]; round(0.5) = 1.
double round_score(double p);

// Mean of (p_i - y_i)^2. Throws ConfigError on an empty or ragged batch.
double mse_loss(std::span<const double> predictions, std::span<const double> labels);

// Kill-aware loss averaged over the batch. time_left entries must lie in
// [0, 1] (InputError otherwise).
//   default: (p - y)^2 + round(p)(1 - t) + y / (t + 1)
//   literal: (p - t)^2 + round(p)(1 - t) + y / (t + 1)
//   prose:   (p - y)^2 + (1 - y) round(p) c_fp + y round(p) / (t + 1)
// The last default/literal term does not depend on p.
double modified_loss(std::span<const double> predictions, std::span<const double> labels,
                     std::span<const double> time_left, LossVariant variant,
                     double false_positive_cost = 1.0);

struct LossOptions {
  LossKind kind = LossKind::kMse;
  LossVariant variant = LossVariant::kDefault;
  RoundGradient round_gradient = RoundGradient::kStraightThrough;
  double false_positive_cost = 1.0;
  double steepness = 20.0;  // slope of the steep-sigmoid round surrogate
};

// d(per-sample loss)/dp for one sample (the batch mean is taken by the
// caller). round(p) is differentiated with the configured convention.
double loss_gradient(double p, double y, double t, const LossOptions& options);

// Per-sample loss value (not averaged), used for logging.
double sample_loss(double p, double y, double t, const LossOptions& options);

}  // namespace procguard
