#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "procguard/features.hpp"

namespace procguard {

struct LabeledSnapshot {
  FeatureVector features{};
  int label = 0;  // 0 benign, 1 malicious
};

// Gini impurity of a node holding n0 benign and n1 malicious samples.
double gini(double n0, double n1);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int leaf_class = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  int predict(const FeatureVector& x) const;
  int depth() const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 16;
  int min_samples_leaf = 5;
  int features_per_split = 6;  // ceil(sqrt(26))
  std::uint64_t seed = 0;
  bool allow_single_class = false;

  bool operator==(const ForestConfig&) const = default;
};

struct ForestClassifier {
  ForestConfig config;
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;

  // Majority vote; an exact tie is benign.
  int predict(const FeatureVector& x) const;

  bool operator==(const ForestClassifier&) const = default;
};

// Greedy CART on the given rows (duplicates allowed). rng drives the
// per-node feature subsets.
DecisionTree grow_tree(std::span<const LabeledSnapshot> data, std::span<const std::size_t> rows,
                       const ForestConfig& config, std::uint64_t seed);

// Each tree sees a bootstrap resample of the data. Throws InputError on an
// empty dataset, or a single-class one unless allowed.
ForestClassifier train_forest(std::span<const LabeledSnapshot> data, const ForestConfig& config);

// Throws ConfigError when the feature count is not 26.
int forest_predict(const ForestClassifier& forest, std::span<const double> features);

// Forest file: JSON tagged "procguard-forest/1".
std::string serialize(const ForestClassifier& forest);
ForestClassifier deserialize_forest(const std::string& text);
void save(const ForestClassifier& forest, const std::string& path);
ForestClassifier load_forest(const std::string& path);

}  // namespace procguard
