#include "procguard/detectors.hpp"

#include "procguard/training.hpp"

namespace procguard {

double GruDetector::score(const ProcessSnapshot& snapshot) {
  auto& rows = history_[snapshot.process_id];
  rows.push_back(normalize(snapshot.features, model_.stats));
  const auto keep = static_cast<std::size_t>(model_.window_size());
  if (rows.size() > keep) rows.erase(rows.begin(), rows.end() - static_cast<std::ptrdiff_t>(keep));
  return model_.predict_window(window_at(rows, rows.size() - 1, model_.window_size()));
}

}  // namespace procguard
