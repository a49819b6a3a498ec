#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "procguard/features.hpp"
#include "procguard/hyperparameters.hpp"
#include "procguard/normalization.hpp"

namespace procguard {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

// A window is window_size normalized feature rows, oldest first.
using Window = std::vector<FeatureVector>;

// Offsets of every weight block inside one flat parameter buffer. Layer l
// holds, in order: Wz Wr Wh (H x in), Uz Ur Uh (H x H), bz br bh (H).
// The output layer (w: H, b: 1) follows the last recurrent layer.
class GruLayout {
 public:
  GruLayout() = default;
  GruLayout(int input_size, int hidden, int depth);

  int input_size() const { return input_size_; }
  int hidden() const { return hidden_; }
  int depth() const { return depth_; }
  int layer_input(int layer) const { return layer == 0 ? input_size_ : hidden_; }
  std::size_t layer_offset(int layer) const { return layer_offsets_[static_cast<std::size_t>(layer)]; }
  std::size_t output_offset() const { return output_offset_; }
  std::size_t size() const { return size_; }

  bool operator==(const GruLayout&) const = default;

 private:
  int input_size_ = 0;
  int hidden_ = 0;
  int depth_ = 0;
  std::vector<std::size_t> layer_offsets_;
  std::size_t output_offset_ = 0;
  std::size_t size_ = 0;
};

template <class Mat, class Vec>
struct GateBlocks {
  Mat Wz, Wr, Wh, Uz, Ur, Uh;
  Vec bz, br, bh;
};

using LayerView = GateBlocks<MatrixMap, VectorMap>;
using ConstLayerView = GateBlocks<ConstMatrixMap, ConstVectorMap>;

LayerView layer_view(const GruLayout& layout, std::span<double> params, int layer);
ConstLayerView layer_view(const GruLayout& layout, std::span<const double> params, int layer);

// Per-run inputs that only matter during training.
struct DropoutMasks {
  // masks[l][t]: inverted-dropout mask on the output of non-final layer l at
  // step t. Empty means no dropout.
  std::vector<std::vector<Eigen::VectorXd>> masks;
};

struct GruClassifier {
  Hyperparameters hyper;
  NormalizationStats stats;
  double threshold = 0.5;
  GruLayout layout;
  std::vector<double> params;

  // Uniform(-1/sqrt(H), 1/sqrt(H)) initialisation, output bias 0.
  static GruClassifier initialise(const Hyperparameters& hp, const NormalizationStats& stats);

  int window_size() const { return hyper.window_size; }

  // Score of one normalized window, in (0, 1).
  double predict_window(const Window& window) const;

  bool operator==(const GruClassifier&) const = default;
};

// Cached activations of one forward pass, needed for backpropagation.
struct GruTape {
  // inputs[l][t]: input to layer l at step t (after dropout for l > 0).
  std::vector<std::vector<Eigen::VectorXd>> inputs;
  // hidden[l][t]: h after step t; hidden[l][0] is the zero initial state,
  // so hidden[l] has T + 1 entries.
  std::vector<std::vector<Eigen::VectorXd>> hidden;
  std::vector<std::vector<Eigen::VectorXd>> z, r, candidate;
  double logit = 0;
  double score = 0;
};

double gru_forward(const GruLayout& layout, std::span<const double> params, const Window& window,
                   const DropoutMasks* dropout = nullptr, GruTape* tape = nullptr);

// Accumulates d(score)/d(params) * upstream into grad (same layout as params).
void gru_backward(const GruLayout& layout, std::span<const double> params, const GruTape& tape,
                  double upstream, std::span<double> grad, const DropoutMasks* dropout = nullptr);

// Model file: a JSON document tagged "procguard-gru/1".
std::string serialize(const GruClassifier& model);
GruClassifier deserialize_gru(const std::string& text);
void save(const GruClassifier& model, const std::string& path);
GruClassifier load_gru(const std::string& path);

}  // namespace procguard
