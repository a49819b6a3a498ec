#pragma once

#include <span>

#include "procguard/features.hpp"
#include "procguard/trace.hpp"

namespace procguard {

struct NormalizationStats {
  FeatureVector mean{};
  FeatureVector std{};

  bool operator==(const NormalizationStats&) const = default;
};

// Population mean and standard deviation over every snapshot of every trace.
// Zero-variance features get std = 1.
NormalizationStats compute_stats(std::span<const ProcessTrace> training_traces);
NormalizationStats compute_stats(std::span<const FeatureVector> rows);

FeatureVector normalize(const FeatureVector& v, const NormalizationStats& s);
FeatureVector denormalize(const FeatureVector& v, const NormalizationStats& s);

}  // namespace procguard
