#include "procguard/training.hpp"

#include <algorithm>
#include <numeric>

#include "procguard/error.hpp"
#include "procguard/normalization.hpp"

namespace procguard {

Window window_at(std::span<const FeatureVector> rows, std::size_t end, int window_size) {
  if (window_size <= 0) throw ConfigError("window_size must be positive");
  if (end >= rows.size()) throw ConfigError("window end beyond trace");
  const auto w = static_cast<std::size_t>(window_size);
  Window window(w, FeatureVector{});
  for (std::size_t k = 0; k < w; ++k) {
    // Slot k holds row (end - (w - 1 - k)).
    const std::size_t back = w - 1 - k;
    if (back <= end) window[k] = rows[end - back];
  }
  return window;
}

double time_left(const ProcessTrace& trace, std::size_t snapshot_index) {
  const double duration = static_cast<double>(trace.unkilled_duration_s);
  if (duration <= 0) return 0.0;
  const double age = static_cast<double>(trace.snapshots[snapshot_index].tick - trace.birth_tick());
  return std::clamp((duration - age) / duration, 0.0, 1.0);
}

std::vector<FeatureVector> normalized_rows(const ProcessTrace& trace, const NormalizationStats& stats) {
  std::vector<FeatureVector> rows;
  rows.reserve(trace.snapshots.size());
  for (const auto& s : trace.snapshots) rows.push_back(normalize(s.features, stats));
  return rows;
}

std::vector<WindowedSample> make_windows(const ProcessTrace& trace, const NormalizationStats& stats,
                                         int window_size) {
  const auto rows = normalized_rows(trace, stats);
  std::vector<WindowedSample> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back({window_at(rows, i, window_size), static_cast<double>(as_int(trace.label)), time_left(trace, i)});
  return out;
}

namespace {

struct WindowRef {
  std::size_t trace = 0;
  std::size_t position = 0;
};

DropoutMasks draw_masks(const GruLayout& layout, std::size_t steps, double rate, std::mt19937_64& rng) {
  DropoutMasks masks;
  if (rate <= 0 || layout.depth() < 2) return masks;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  masks.masks.resize(static_cast<std::size_t>(layout.depth() - 1));
  for (auto& layer : masks.masks) {
    layer.resize(steps);
    for (auto& m : layer) {
      m.resize(layout.hidden());
      for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = keep(rng) ? scale : 0.0;
    }
  }
  return masks;
}

}  // namespace

GruClassifier train(std::span<const ProcessTrace> traces, const Hyperparameters& hp, const TrainingOptions& options,
                    TrainingLog* log) {
  validate(hp);
  std::vector<WindowRef> by_class[2];
  for (std::size_t i = 0; i < traces.size(); ++i)
    for (std::size_t k = 0; k < traces[i].snapshots.size(); ++k)
      by_class[as_int(traces[i].label)].push_back({i, k});
  if (by_class[0].empty() || by_class[1].empty())
    throw InputError("training data must contain both benign and malicious windows");

  const NormalizationStats stats = compute_stats(traces);
  GruClassifier model = GruClassifier::initialise(hp, stats);
  model.threshold = 0.5;

  std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t cap = std::min(by_class[0].size(), by_class[1].size());
  if (options.per_class_cap > 0) cap = std::min(cap, options.per_class_cap);
  std::vector<WindowRef> chosen;
  for (auto& cls : by_class) {
    std::shuffle(cls.begin(), cls.end(), rng);
    chosen.insert(chosen.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(cap));
  }
  if (log) {
    log->epoch_loss.clear();
    log->windows_per_class = cap;
  }
  if (hp.epochs == 0) return model;

  std::vector<std::vector<FeatureVector>> rows(traces.size());
  for (const auto& ref : chosen)
    if (rows[ref.trace].empty()) rows[ref.trace] = normalized_rows(traces[ref.trace], stats);

  std::vector<WindowedSample> samples;
  samples.reserve(chosen.size());
  for (const auto& ref : chosen) {
    const auto& trace = traces[ref.trace];
    samples.push_back({window_at(rows[ref.trace], ref.position, hp.window_size),
                       static_cast<double>(as_int(trace.label)), time_left(trace, ref.position)});
  }

  LossOptions loss;
  loss.kind = hp.loss_kind;
  loss.variant = hp.loss_variant;
  loss.round_gradient = options.round_gradient;
  loss.false_positive_cost = options.false_positive_cost;

  AdamState adam(model.params.size());
  std::vector<double> grad(model.params.size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  GruTape tape;
  const auto batch = static_cast<std::size_t>(hp.batch_size);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double inv_n = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = samples[order[k]];
        const DropoutMasks masks = draw_masks(model.layout, s.window.size(), hp.dropout_rate, rng);
        const double p = gru_forward(model.layout, model.params, s.window, &masks, &tape);
        epoch_sum += sample_loss(p, s.label, s.time_left, loss);
        gru_backward(model.layout, model.params, tape, loss_gradient(p, s.label, s.time_left, loss) * inv_n, grad,
                     &masks);
      }
      adam_step(model.params, grad, adam, options.adam);
    }
    if (log) log->epoch_loss.push_back(epoch_sum / static_cast<double>(samples.size()));
  }
  return model;
}

Hyperparameters sample_hyperparameters(const SearchSpace& space, std::mt19937_64& rng) {
  if (!space.within_full_space()) throw ConfigError("search space exceeds the supported ranges");
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Hyperparameters hp;
  hp.hidden_neurons = uniform_int(space.hidden_min, space.hidden_max);
  hp.depth = uniform_int(space.depth_min, space.depth_max);
  hp.batch_size = space.batch_choices[static_cast<std::size_t>(
      uniform_int(0, static_cast<int>(space.batch_choices.size()) - 1))];
  hp.epochs = uniform_int(space.epochs_min, space.epochs_max);
  hp.dropout_rate = uniform_int(0, space.dropout_tenths_max) / 10.0;
  hp.window_size = uniform_int(space.window_min, space.window_max);
  hp.seed = rng();
  return hp;
}

SearchResult random_search(const SearchSpace& space, int n_trials, std::span<const ProcessTrace> train_split,
                           const Objective& objective, const SearchOptions& options) {
  if (n_trials < 1) throw ConfigError("random search needs at least one trial");
  std::mt19937_64 rng(options.seed);
  SearchResult result;
  double best = 0;
  for (int i = 0; i < n_trials; ++i) {
    Hyperparameters hp = sample_hyperparameters(space, rng);
    hp.loss_kind = options.loss_kind;
    hp.loss_variant = options.loss_variant;
    GruClassifier model = train(train_split, hp, options.training);
    const double score = objective(model);
    result.trials.push_back({static_cast<std::size_t>(i), hp, score});
    if (i == 0 || score < best) {
      best = score;
      result.best_index = static_cast<std::size_t>(i);
      result.best_model = std::move(model);
    }
  }
  return result;
}

}  // namespace procguard
