#include "procguard/features.hpp"

#include <cmath>

namespace procguard {

bool features_valid(const FeatureVector& v) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(v[i])) return false;
    // Priority codes are ordinal and may be negative (nice values).
    if (i == index(Feature::kProcessPriority) || i == index(Feature::kIoPriority)) continue;
    if (v[i] < 0) return false;
  }
  return true;
}

}  // namespace procguard
