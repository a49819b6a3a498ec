// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "procguard/gru.hpp"
#include "procguard/loss.hpp"
#include "procguard/scenario.hpp"

namespace procguard::testing {

inline ProcessPlan plan(Pid pid, std::optional<Pid> parent, Tick birth, Tick end, Label label = Label::kMalicious,
                        const std::string& app = "app", bool damaging = false) {
  ProcessPlan p;
  p.pid = pid;
  p.parent = parent;
  p.app_id = app;
  p.label = label;
  p.birth = birth;
  p.end = end;
  p.damaging = damaging;
  p.features.assign(static_cast<std::size_t>(end - birth), FeatureVector{});
  for (std::size_t k = 0; k < p.features.size(); ++k)
    p.features[k][index(Feature::kSecondsSinceStart)] = static_cast<double>(k + 1);
  return p;
}

// Process A (120 s) spawns B (30 s) and C (20 s) one second in.
inline Scenario three_process_tree(std::optional<DamageSpec> damage = std::nullopt) {
  Scenario s;
  s.id = "fig";
  s.config.duration_s = 120;
  s.apps.push_back({"app", "ransom", Label::kMalicious, 0, damage});
  s.processes.push_back(plan(10, std::nullopt, 0, 120, Label::kMalicious, "app", damage.has_value()));
  s.processes.push_back(plan(11, Pid{10}, 1, 31));
  s.processes.push_back(plan(12, Pid{10}, 1, 21));
  return s;
}

// Random process forest over several apps; parents precede children and
// children are born before their parent ends.
inline Scenario random_forest_scenario(std::mt19937_64& rng, int max_processes = 40) {
  Scenario s;
  s.id = "rand";
  std::uniform_int_distribution<int> n_proc(1, max_processes);
  const int n = n_proc(rng);
  std::uniform_int_distribution<Tick> dur(1, 60), start(0, 20);
  std::bernoulli_distribution is_root(0.25), malicious(0.4);
  Pid next = 100;
  for (int i = 0; i < n; ++i) {
    ProcessPlan p;
    if (i == 0 || is_root(rng)) {
      const Label label = malicious(rng) ? Label::kMalicious : Label::kBenign;
      const std::string app = "a" + std::to_string(i);
      s.apps.push_back({app, "x", label, 0, std::nullopt});
      const Tick b = start(rng);
      p = plan(next, std::nullopt, b, b + dur(rng), label, app);
    } else {
      const auto& parent = s.processes[std::uniform_int_distribution<std::size_t>(0, s.processes.size() - 1)(rng)];
      const Tick b = std::uniform_int_distribution<Tick>(parent.birth, parent.end - 1)(rng);
      p = plan(next, parent.pid, b, b + dur(rng), parent.label, parent.app_id);
    }
    next += 3;
    s.processes.push_back(std::move(p));
  }
  std::stable_sort(s.processes.begin(), s.processes.end(),
                   [](const ProcessPlan& a, const ProcessPlan& b) { return a.birth < b.birth; });
  // A child born at the same tick as its parent must still follow it.
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < s.processes.size() && !moved; ++i) {
      if (!s.processes[i].parent) continue;
      for (std::size_t j = i + 1; j < s.processes.size(); ++j)
        if (s.processes[j].pid == *s.processes[i].parent) {
          std::rotate(s.processes.begin() + static_cast<std::ptrdiff_t>(i),
                      s.processes.begin() + static_cast<std::ptrdiff_t>(j),
                      s.processes.begin() + static_cast<std::ptrdiff_t>(j + 1));
          moved = true;
          break;
        }
    }
  }
  Tick last = 0;
  for (const auto& p : s.processes) last = std::max(last, p.end);
  s.config.duration_s = last;
  return s;
}

// Loss with round(p) replaced by p: the function whose exact derivative the
// straight-through gradient reports.
inline double surrogate_loss(double p, double y, double t, LossKind kind, LossVariant variant) {
  if (kind == LossKind::kMse) return (p - y) * (p - y);
  switch (variant) {
    case LossVariant::kDefault: return (p - y) * (p - y) + p * (1 - t) + y / (t + 1);
    case LossVariant::kLiteral: return (p - t) * (p - t) + p * (1 - t) + y / (t + 1);
    case LossVariant::kProse: return (p - y) * (p - y) + (1 - y) * p + y * p / (t + 1);
  }
  return 0;
}

struct GradSample {
  Window window;
  double y = 0;
  double t = 0;
};

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t compared = 0;
};

// Central differences (step h) of the batch-mean surrogate loss against the
// analytic backward pass. `coords` restricts the comparison to a subset of
// parameter indices (all of them when null).
inline GradCheckResult gradient_check(const GruLayout& layout, std::vector<double> params,
                                      const std::vector<GradSample>& batch, LossKind kind, LossVariant variant,
                                      const DropoutMasks* dropout = nullptr, double h = 1e-5,
                                      const std::vector<std::size_t>* coords = nullptr) {
  LossOptions options;
  options.kind = kind;
  options.variant = variant;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(params.size(), 0.0);
  for (const auto& s : batch) {
    GruTape tape;
    const double p = gru_forward(layout, params, s.window, dropout, &tape);
    gru_backward(layout, params, tape, loss_gradient(p, s.y, s.t, options) * inv_n, grad, dropout);
  }
  auto objective = [&](const std::vector<double>& w) {
    double total = 0;
    for (const auto& s : batch) total += surrogate_loss(gru_forward(layout, w, s.window, dropout), s.y, s.t, kind, variant);
    return total * inv_n;
  };
  std::vector<std::size_t> all;
  if (!coords) {
    all.resize(params.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = &all;
  }
  GradCheckResult result;
  for (std::size_t i : *coords) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = objective(params);
    params[i] = saved - h;
    const double down = objective(params);
    params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    // Absolute floor keeps near-zero gradients from dividing noise by noise.
    const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-4});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - grad[i]) / scale);
    ++result.compared;
  }
  return result;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("procguard_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace procguard::testing
