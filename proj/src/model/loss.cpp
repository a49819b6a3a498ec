#include "procguard/loss.hpp"

#include <cmath>
#include <string>

#include "procguard/error.hpp"

namespace procguard {

namespace {

void check_batch(std::size_t a, std::size_t b) {
  if (a == 0) throw ConfigError("empty batch");
  if (a != b) throw ConfigError("predictions and labels differ in length");
}

void check_time_left(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("time_left outside [0,1]: " + std::to_string(t));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double round_score(double p) { return p >= 0.5 ? 1.0 : 0.0; }

double mse_loss(std::span<const double> predictions, std::span<const double> labels) {
  check_batch(predictions.size(), labels.size());
  double sum = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - labels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predictions.size());
}

double sample_loss(double p, double y, double t, const LossOptions& options) {
  if (options.kind == LossKind::kMse) return (p - y) * (p - y);
  check_time_left(t);
  const double k = round_score(p);
  switch (options.variant) {
    case LossVariant::kDefault:
      return (p - y) * (p - y) + k * (1.0 - t) + y / (t + 1.0);
    case LossVariant::kLiteral:
      return (p - t) * (p - t) + k * (1.0 - t) + y / (t + 1.0);
    case LossVariant::kProse:
      return (p - y) * (p - y) + (1.0 - y) * k * options.false_positive_cost + y * k / (t + 1.0);
  }
  throw ConfigError("unknown loss variant");
}

double modified_loss(std::span<const double> predictions, std::span<const double> labels,
                     std::span<const double> time_left, LossVariant variant, double false_positive_cost) {
  check_batch(predictions.size(), labels.size());
  if (time_left.size() != predictions.size()) throw ConfigError("time_left differs in length");
  LossOptions options;
  options.kind = LossKind::kModified;
  options.variant = variant;
  options.false_positive_cost = false_positive_cost;
  double sum = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    sum += sample_loss(predictions[i], labels[i], time_left[i], options);
  return sum / static_cast<double>(predictions.size());
}

double loss_gradient(double p, double y, double t, const LossOptions& options) {
  if (options.kind == LossKind::kMse) return 2.0 * (p - y);
  check_time_left(t);
  double dround = 1.0;
  if (options.round_gradient == RoundGradient::kSteepSigmoid) {
    const double s = sigmoid(options.steepness * (p - 0.5));
    dround = options.steepness * s * (1.0 - s);
  }
  switch (options.variant) {
    case LossVariant::kDefault:
      return 2.0 * (p - y) + dround * (1.0 - t);
    case LossVariant::kLiteral:
      return 2.0 * (p - t) + dround * (1.0 - t);
    case LossVariant::kProse:
      return 2.0 * (p - y) + dround * ((1.0 - y) * options.false_positive_cost + y / (t + 1.0));
  }
  throw ConfigError("unknown loss variant");
}

}  // namespace procguard
