#include "procguard/hyperparameters.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "procguard/error.hpp"

namespace procguard {

std::string_view to_string(LossKind k) { return k == LossKind::kMse ? "mse" : "modified"; }

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kDefault: return "default";
    case LossVariant::kLiteral: return "literal";
    case LossVariant::kProse: return "prose";
  }
  return "default";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "modified") return LossKind::kModified;
  throw ConfigError("unknown loss kind '" + std::string(s) + "'");
}

LossVariant parse_loss_variant(std::string_view s) {
  if (s == "default") return LossVariant::kDefault;
  if (s == "literal") return LossVariant::kLiteral;
  if (s == "prose") return LossVariant::kProse;
  throw ConfigError("unknown loss variant '" + std::string(s) + "'");
}

bool SearchSpace::within_full_space() const {
  const SearchSpace full;
  auto inside = [](int lo, int hi, int flo, int fhi) { return lo <= hi && lo >= flo && hi <= fhi; };
  if (!inside(hidden_min, hidden_max, full.hidden_min, full.hidden_max)) return false;
  if (!inside(depth_min, depth_max, full.depth_min, full.depth_max)) return false;
  if (!inside(epochs_min, epochs_max, full.epochs_min, full.epochs_max)) return false;
  if (!inside(window_min, window_max, full.window_min, full.window_max)) return false;
  if (dropout_tenths_max < 0 || dropout_tenths_max > full.dropout_tenths_max) return false;
  if (batch_choices.empty()) return false;
  return std::all_of(batch_choices.begin(), batch_choices.end(), [&](int b) {
    return std::find(full.batch_choices.begin(), full.batch_choices.end(), b) !=
           full.batch_choices.end();
  });
}

void validate(const Hyperparameters& hp) {
  const SearchSpace full;
  auto fail = [](const std::string& what) { throw ConfigError("hyperparameter out of range: " + what); };
  if (hp.hidden_neurons < full.hidden_min || hp.hidden_neurons > full.hidden_max)
    fail("hidden_neurons=" + std::to_string(hp.hidden_neurons));
  if (hp.depth < full.depth_min || hp.depth > full.depth_max) fail("depth=" + std::to_string(hp.depth));
  if (std::find(full.batch_choices.begin(), full.batch_choices.end(), hp.batch_size) ==
      full.batch_choices.end())
    fail("batch_size=" + std::to_string(hp.batch_size));
  // epochs = 0 is accepted: it yields the initial model.
  if (hp.epochs < 0 || hp.epochs > full.epochs_max) fail("epochs=" + std::to_string(hp.epochs));
  const double tenths = hp.dropout_rate * 10.0;
  if (hp.dropout_rate < 0 || hp.dropout_rate > 0.5 + 1e-12 || std::abs(tenths - std::round(tenths)) > 1e-9)
    fail("dropout_rate=" + std::to_string(hp.dropout_rate));
  if (hp.window_size < full.window_min || hp.window_size > full.window_max)
    fail("window_size=" + std::to_string(hp.window_size));
}

}  // namespace procguard
