#include "procguard/normalization.hpp"

#include <cmath>
#include <vector>

#include "procguard/error.hpp"

namespace procguard {

NormalizationStats compute_stats(std::span<const FeatureVector> rows) {
  if (rows.empty()) throw InputError("no training data");
  NormalizationStats stats;
  const double n = static_cast<double>(rows.size());
  for (const auto& row : rows)
    for (std::size_t i = 0; i < kFeatureCount; ++i) stats.mean[i] += row[i];
  for (auto& m : stats.mean) m /= n;
  // Two-pass population variance.
  for (const auto& row : rows)
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const double d = row[i] - stats.mean[i];
      stats.std[i] += d * d;
    }
  for (auto& s : stats.std) {
    s = std::sqrt(s / n);
    if (!(s > 0)) s = 1.0;
  }
  return stats;
}

NormalizationStats compute_stats(std::span<const ProcessTrace> training_traces) {
  std::vector<FeatureVector> rows;
  for (const auto& trace : training_traces)
    for (const auto& snap : trace.snapshots) rows.push_back(snap.features);
  return compute_stats(std::span<const FeatureVector>(rows));
}

FeatureVector normalize(const FeatureVector& v, const NormalizationStats& s) {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = (v[i] - s.mean[i]) / s.std[i];
  return out;
}

FeatureVector denormalize(const FeatureVector& v, const NormalizationStats& s) {
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = v[i] * s.std[i] + s.mean[i];
  return out;
}

}  // namespace procguard
