#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace procguard {

enum class LossKind : std::uint8_t { kMse, kModified };

// Readings of the kill-aware loss. kDefault squares (p - y); kLiteral squares
// (p - t) as printed; kProse charges a flat false-positive penalty and scales
// true positives by 1/(t + 1).
enum class LossVariant : std::uint8_t { kDefault, kLiteral, kProse };

// Backward treatment of round(p) in the modified loss.
enum class RoundGradient : std::uint8_t { kStraightThrough, kSteepSigmoid };

std::string_view to_string(LossKind k);
std::string_view to_string(LossVariant v);
LossKind parse_loss_kind(std::string_view s);
LossVariant parse_loss_variant(std::string_view s);

struct Hyperparameters {
  int hidden_neurons = 50;
  int depth = 1;
  int batch_size = 64;
  int epochs = 10;
  double dropout_rate = 0.0;
  int window_size = 5;
  LossKind loss_kind = LossKind::kMse;
  LossVariant loss_variant = LossVariant::kDefault;
  std::uint64_t seed = 0;

  bool operator==(const Hyperparameters&) const = default;
};

// Bounds of the random hyperparameter search.
struct SearchSpace {
  int hidden_min = 50, hidden_max = 5000;
  int depth_min = 1, depth_max = 3;
  std::vector<int> batch_choices = {64, 128, 256};
  int epochs_min = 1, epochs_max = 200;
  int dropout_tenths_max = 5;  // dropout in {0, 0.1, ..., max/10}
  int window_min = 1, window_max = 30;

  static SearchSpace full() { return {}; }
  bool within_full_space() const;
};

// Throws ConfigError when a field falls outside the full search space.
void validate(const Hyperparameters& hp);

}  // namespace procguard
