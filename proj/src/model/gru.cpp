#include "procguard/gru.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "procguard/error.hpp"

namespace procguard {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

template <class View, class Span>
View make_view(const GruLayout& layout, Span params, int layer) {
  const int h = layout.hidden();
  const int in = layout.layer_input(layer);
  auto* base = params.data() + layout.layer_offset(layer);
  const std::size_t w = static_cast<std::size_t>(h) * static_cast<std::size_t>(in);
  const std::size_t u = static_cast<std::size_t>(h) * static_cast<std::size_t>(h);
  return View{
      {base, h, in},
      {base + w, h, in},
      {base + 2 * w, h, in},
      {base + 3 * w, h, h},
      {base + 3 * w + u, h, h},
      {base + 3 * w + 2 * u, h, h},
      {base + 3 * w + 3 * u, h},
      {base + 3 * w + 3 * u + h, h},
      {base + 3 * w + 3 * u + 2 * h, h},
  };
}

}  // namespace

GruLayout::GruLayout(int input_size, int hidden, int depth)
    : input_size_(input_size), hidden_(hidden), depth_(depth) {
  if (input_size <= 0 || hidden <= 0 || depth <= 0)
    throw ConfigError("GRU layout needs positive input, hidden and depth");
  std::size_t offset = 0;
  const auto h = static_cast<std::size_t>(hidden);
  for (int l = 0; l < depth; ++l) {
    layer_offsets_.push_back(offset);
    const auto in = static_cast<std::size_t>(layer_input(l));
    offset += 3 * h * in + 3 * h * h + 3 * h;
  }
  output_offset_ = offset;
  size_ = offset + h + 1;
}

LayerView layer_view(const GruLayout& layout, std::span<double> params, int layer) {
  return make_view<LayerView>(layout, params, layer);
}

ConstLayerView layer_view(const GruLayout& layout, std::span<const double> params, int layer) {
  return make_view<ConstLayerView>(layout, params, layer);
}

GruClassifier GruClassifier::initialise(const Hyperparameters& hp, const NormalizationStats& stats) {
  validate(hp);
  GruClassifier model;
  model.hyper = hp;
  model.stats = stats;
  model.layout = GruLayout(static_cast<int>(kFeatureCount), hp.hidden_neurons, hp.depth);
  model.params.assign(model.layout.size(), 0.0);
  std::mt19937_64 rng(hp.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hp.hidden_neurons));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  // Output bias (last entry) stays 0.
  for (std::size_t i = 0; i + 1 < model.params.size(); ++i) model.params[i] = uniform(rng);
  return model;
}

double GruClassifier::predict_window(const Window& window) const {
  if (static_cast<int>(window.size()) != hyper.window_size)
    throw ConfigError("window holds " + std::to_string(window.size()) + " rows, model expects " +
                      std::to_string(hyper.window_size));
  return gru_forward(layout, params, window);
}

double gru_forward(const GruLayout& layout, std::span<const double> params, const Window& window,
                   const DropoutMasks* dropout, GruTape* tape) {
  if (params.size() != layout.size())
    throw ConfigError("parameter count " + std::to_string(params.size()) + " does not match layout " +
                      std::to_string(layout.size()));
  if (window.empty()) throw ConfigError("empty window");
  if (layout.input_size() != static_cast<int>(kFeatureCount))
    throw ConfigError("layout input size differs from feature count");

  const int depth = layout.depth();
  const int h = layout.hidden();
  const std::size_t steps = window.size();
  const bool use_dropout = dropout != nullptr && !dropout->masks.empty();

  if (tape) {
    tape->inputs.assign(static_cast<std::size_t>(depth), {});
    tape->hidden.assign(static_cast<std::size_t>(depth), {});
    tape->z.assign(static_cast<std::size_t>(depth), {});
    tape->r.assign(static_cast<std::size_t>(depth), {});
    tape->candidate.assign(static_cast<std::size_t>(depth), {});
  }

  std::vector<Eigen::VectorXd> layer_in(steps);
  for (std::size_t t = 0; t < steps; ++t)
    layer_in[t] = Eigen::Map<const Eigen::VectorXd>(window[t].data(), static_cast<Eigen::Index>(kFeatureCount));

  std::vector<Eigen::VectorXd> layer_out(steps);
  for (int l = 0; l < depth; ++l) {
    const auto v = layer_view(layout, params, l);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
    const auto li = static_cast<std::size_t>(l);
    if (tape) tape->hidden[li].push_back(state);
    for (std::size_t t = 0; t < steps; ++t) {
      const Eigen::VectorXd& x = layer_in[t];
      Eigen::VectorXd z = sigmoid(v.Wz * x + v.Uz * state + v.bz);
      Eigen::VectorXd r = sigmoid(v.Wr * x + v.Ur * state + v.br);
      Eigen::VectorXd c = (v.Wh * x + v.Uh * r.cwiseProduct(state) + v.bh).array().tanh().matrix();
      Eigen::VectorXd next = (1.0 - z.array()).matrix().cwiseProduct(state) + z.cwiseProduct(c);
      if (tape) {
        tape->inputs[li].push_back(x);
        tape->z[li].push_back(std::move(z));
        tape->r[li].push_back(std::move(r));
        tape->candidate[li].push_back(std::move(c));
        tape->hidden[li].push_back(next);
      }
      state = std::move(next);
      layer_out[t] = state;
      if (use_dropout && l + 1 < depth) layer_out[t] = layer_out[t].cwiseProduct(dropout->masks[li][t]);
    }
    std::swap(layer_in, layer_out);
  }

  const ConstVectorMap w(params.data() + layout.output_offset(), h);
  const double b = params[layout.output_offset() + static_cast<std::size_t>(h)];
  // layer_in now holds the top layer outputs; the final step feeds the head.
  const double logit = w.dot(layer_in.back()) + b;
  const double score = sigmoid(logit);
  if (tape) {
    tape->logit = logit;
    tape->score = score;
  }
  return score;
}

void gru_backward(const GruLayout& layout, std::span<const double> params, const GruTape& tape,
                  double upstream, std::span<double> grad, const DropoutMasks* dropout) {
  if (grad.size() != layout.size()) throw ConfigError("gradient buffer does not match layout");
  const int depth = layout.depth();
  const int h = layout.hidden();
  const std::size_t steps = tape.inputs.front().size();
  const bool use_dropout = dropout != nullptr && !dropout->masks.empty();

  const double dlogit = upstream * tape.score * (1.0 - tape.score);
  const std::size_t out = layout.output_offset();
  const ConstVectorMap w(params.data() + out, h);
  const auto top = static_cast<std::size_t>(depth - 1);
  VectorMap(grad.data() + out, h) += dlogit * tape.hidden[top][steps];
  grad[out + static_cast<std::size_t>(h)] += dlogit;

  // External gradient arriving at each step's output of the current layer.
  std::vector<Eigen::VectorXd> dout(steps, Eigen::VectorXd::Zero(h));
  dout[steps - 1] = dlogit * w;

  for (int l = depth - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    const auto v = layer_view(layout, params, l);
    auto g = layer_view(layout, grad, l);
    const int in = layout.layer_input(l);
    std::vector<Eigen::VectorXd> dinput(steps, Eigen::VectorXd::Zero(in));

    Eigen::VectorXd dh = Eigen::VectorXd::Zero(h);
    for (std::size_t t = steps; t-- > 0;) {
      dh += dout[t];
      const Eigen::VectorXd& x = tape.inputs[li][t];
      const Eigen::VectorXd& prev = tape.hidden[li][t];
      const Eigen::VectorXd& z = tape.z[li][t];
      const Eigen::VectorXd& r = tape.r[li][t];
      const Eigen::VectorXd& c = tape.candidate[li][t];

      const Eigen::VectorXd dz = dh.cwiseProduct(c - prev);
      const Eigen::VectorXd dc = dh.cwiseProduct(z);
      Eigen::VectorXd dprev = dh.cwiseProduct((1.0 - z.array()).matrix());

      const Eigen::VectorXd da_h = dc.cwiseProduct((1.0 - c.array().square()).matrix());
      const Eigen::VectorXd rprev = r.cwiseProduct(prev);
      g.Wh.noalias() += da_h * x.transpose();
      g.Uh.noalias() += da_h * rprev.transpose();
      g.bh += da_h;
      const Eigen::VectorXd drprev = v.Uh.transpose() * da_h;
      const Eigen::VectorXd dr = drprev.cwiseProduct(prev);
      dprev += drprev.cwiseProduct(r);

      const Eigen::VectorXd da_r = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
      g.Wr.noalias() += da_r * x.transpose();
      g.Ur.noalias() += da_r * prev.transpose();
      g.br += da_r;
      dprev.noalias() += v.Ur.transpose() * da_r;

      const Eigen::VectorXd da_z = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
      g.Wz.noalias() += da_z * x.transpose();
      g.Uz.noalias() += da_z * prev.transpose();
      g.bz += da_z;
      dprev.noalias() += v.Uz.transpose() * da_z;

      if (l > 0) {
        dinput[t].noalias() = v.Wz.transpose() * da_z + v.Wr.transpose() * da_r + v.Wh.transpose() * da_h;
      }
      dh = std::move(dprev);
    }

    if (l > 0) {
      const auto below = static_cast<std::size_t>(l - 1);
      for (std::size_t t = 0; t < steps; ++t) {
        dout[t] = dinput[t];
        if (use_dropout) dout[t] = dout[t].cwiseProduct(dropout->masks[below][t]);
      }
    }
  }
}

namespace {

constexpr const char* kGruFormat = "procguard-gru/1";

nlohmann::ordered_json hyper_json(const Hyperparameters& hp) {
  nlohmann::ordered_json j;
  j["hidden_neurons"] = hp.hidden_neurons;
  j["depth"] = hp.depth;
  j["batch_size"] = hp.batch_size;
  j["epochs"] = hp.epochs;
  j["dropout_rate"] = hp.dropout_rate;
  j["window_size"] = hp.window_size;
  j["loss_kind"] = std::string(to_string(hp.loss_kind));
  j["loss_variant"] = std::string(to_string(hp.loss_variant));
  j["seed"] = hp.seed;
  return j;
}

Hyperparameters parse_hyper(const nlohmann::json& j) {
  Hyperparameters hp;
  hp.hidden_neurons = j.at("hidden_neurons").get<int>();
  hp.depth = j.at("depth").get<int>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.epochs = j.at("epochs").get<int>();
  hp.dropout_rate = j.at("dropout_rate").get<double>();
  hp.window_size = j.at("window_size").get<int>();
  hp.loss_kind = parse_loss_kind(j.at("loss_kind").get<std::string>());
  hp.loss_variant = parse_loss_variant(j.at("loss_variant").get<std::string>());
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

}  // namespace

std::string serialize(const GruClassifier& model) {
  nlohmann::ordered_json j;
  j["format"] = kGruFormat;
  j["hyperparameters"] = hyper_json(model.hyper);
  j["threshold"] = model.threshold;
  j["normalization"] = {{"mean", model.stats.mean}, {"std", model.stats.std}};
  j["input_size"] = model.layout.input_size();
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  const std::span<const double> params(model.params);
  auto rows = [](const auto& m) {
    std::vector<double> flat(m.data(), m.data() + m.size());
    return flat;
  };
  for (int l = 0; l < model.layout.depth(); ++l) {
    const auto v = layer_view(model.layout, params, l);
    nlohmann::ordered_json layer;
    layer["W_update"] = rows(v.Wz);
    layer["W_reset"] = rows(v.Wr);
    layer["W_candidate"] = rows(v.Wh);
    layer["U_update"] = rows(v.Uz);
    layer["U_reset"] = rows(v.Ur);
    layer["U_candidate"] = rows(v.Uh);
    layer["b_update"] = rows(v.bz);
    layer["b_reset"] = rows(v.br);
    layer["b_candidate"] = rows(v.bh);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  const auto out = model.layout.output_offset();
  const auto h = static_cast<std::size_t>(model.layout.hidden());
  j["output"] = {{"w", std::vector<double>(model.params.begin() + static_cast<std::ptrdiff_t>(out),
                                           model.params.begin() + static_cast<std::ptrdiff_t>(out + h))},
                 {"b", model.params[out + h]}};
  return j.dump(1) + "\n";
}

GruClassifier deserialize_gru(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kGruFormat)
    throw InputError(std::string("model file is not tagged ") + kGruFormat);
  try {
    GruClassifier model;
    model.hyper = parse_hyper(j.at("hyperparameters"));
    model.threshold = j.at("threshold").get<double>();
    if (!(model.threshold >= 0.0 && model.threshold <= 1.0)) throw InputError("threshold outside [0,1]");
    model.stats.mean = j.at("normalization").at("mean").get<FeatureVector>();
    model.stats.std = j.at("normalization").at("std").get<FeatureVector>();
    model.layout = GruLayout(j.at("input_size").get<int>(), model.hyper.hidden_neurons, model.hyper.depth);
    model.params.assign(model.layout.size(), 0.0);
    const auto& layers = j.at("layers");
    if (static_cast<int>(layers.size()) != model.layout.depth()) throw InputError("layer count mismatch");
    std::span<double> params(model.params);
    auto fill = [](auto block, const nlohmann::json& arr) {
      const auto values = arr.get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != block.size()) throw InputError("weight block size mismatch");
      std::copy(values.begin(), values.end(), block.data());
    };
    for (int l = 0; l < model.layout.depth(); ++l) {
      auto v = layer_view(model.layout, params, l);
      const auto& lj = layers[static_cast<std::size_t>(l)];
      fill(v.Wz, lj.at("W_update"));
      fill(v.Wr, lj.at("W_reset"));
      fill(v.Wh, lj.at("W_candidate"));
      fill(v.Uz, lj.at("U_update"));
      fill(v.Ur, lj.at("U_reset"));
      fill(v.Uh, lj.at("U_candidate"));
      fill(v.bz, lj.at("b_update"));
      fill(v.br, lj.at("b_reset"));
      fill(v.bh, lj.at("b_candidate"));
    }
    const auto out = model.layout.output_offset();
    const auto h = model.layout.hidden();
    fill(VectorMap(model.params.data() + out, h), j.at("output").at("w"));
    model.params[out + static_cast<std::size_t>(h)] = j.at("output").at("b").get<double>();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void save(const GruClassifier& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << serialize(model);
}

GruClassifier load_gru(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_gru(ss.str());
}

}  // namespace procguard
