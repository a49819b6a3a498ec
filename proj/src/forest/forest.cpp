#include "procguard/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "procguard/error.hpp"

namespace procguard {

double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n <= 0) return 0.0;
  const double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InputError("decision tree without nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.feature >= static_cast<int>(kFeatureCount) || !std::isfinite(node.threshold) || node.left <= 0 ||
        node.right <= 0 || node.left >= n || node.right >= n)
      throw InputError("decision tree node is malformed");
  }
}

int DecisionTree::predict(const FeatureVector& x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return nodes_[i].leaf_class;
}

int DecisionTree::depth() const {
  // Children always come after their parent, so one forward pass suffices.
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes_[i].is_leaf()) continue;
    level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
    level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
  }
  return deepest;
}

int ForestClassifier::predict(const FeatureVector& x) const {
  std::size_t votes = 0;
  for (const auto& tree : trees) votes += static_cast<std::size_t>(tree.predict(x));
  return 2 * votes > trees.size() ? 1 : 0;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0;
  double impurity = 0;
};

struct Frame {
  std::vector<std::size_t> rows;
  int depth = 0;
  std::size_t node = 0;
};

}  // namespace

DecisionTree grow_tree(std::span<const LabeledSnapshot> data, std::span<const std::size_t> rows,
                       const ForestConfig& config, std::uint64_t seed) {
  if (rows.empty()) throw InputError("cannot grow a tree on zero rows");
  std::mt19937_64 rng(seed);
  const auto min_leaf = static_cast<std::size_t>(std::max(1, config.min_samples_leaf));
  const int mtry = std::clamp(config.features_per_split, 1, static_cast<int>(kFeatureCount));

  std::vector<TreeNode> nodes(1);
  std::vector<Frame> stack;
  stack.push_back({std::vector<std::size_t>(rows.begin(), rows.end()), 0, 0});
  std::vector<std::pair<double, int>> column;
  std::array<std::size_t, kFeatureCount> features;
  std::iota(features.begin(), features.end(), std::size_t{0});

  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    double n1 = 0;
    for (auto r : frame.rows) n1 += data[r].label;
    const double n = static_cast<double>(frame.rows.size());
    const double n0 = n - n1;
    TreeNode& leaf = nodes[frame.node];
    leaf.leaf_class = n1 > n0 ? 1 : 0;
    const double parent_impurity = gini(n0, n1);
    if (parent_impurity == 0.0 || frame.depth >= config.max_depth || frame.rows.size() < 2 * min_leaf) continue;

    std::shuffle(features.begin(), features.end(), rng);
    Split best;
    best.impurity = parent_impurity;
    int visited = 0;
    for (std::size_t fi = 0; fi < kFeatureCount && visited < mtry; ++fi) {
      const std::size_t f = features[fi];
      column.clear();
      for (auto r : frame.rows) column.emplace_back(data[r].features[f], data[r].label);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;  // constant here
      ++visited;
      double left1 = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left1 += column[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = column.size() - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        if (column[i].first == column[i + 1].first) continue;
        const double l = static_cast<double>(nl), rr = static_cast<double>(nr);
        const double right1 = n1 - left1;
        const double impurity = (l * gini(l - left1, left1) + rr * gini(rr - right1, right1)) / n;
        if (impurity < best.impurity - 1e-12) {
          best.feature = static_cast<int>(f);
          best.impurity = impurity;
          double mid = 0.5 * (column[i].first + column[i + 1].first);
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best.threshold = mid;
        }
      }
    }
    if (best.feature < 0) continue;

    Frame left{{}, frame.depth + 1, nodes.size()};
    Frame right{{}, frame.depth + 1, nodes.size() + 1};
    for (auto r : frame.rows)
      (data[r].features[static_cast<std::size_t>(best.feature)] <= best.threshold ? left.rows : right.rows).push_back(r);
    TreeNode& split = nodes[frame.node];
    split.feature = best.feature;
    split.threshold = best.threshold;
    split.left = static_cast<int>(left.node);
    split.right = static_cast<int>(right.node);
    nodes.emplace_back();
    nodes.emplace_back();
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
  return DecisionTree(std::move(nodes));
}

ForestClassifier train_forest(std::span<const LabeledSnapshot> data, const ForestConfig& config) {
  if (data.empty()) throw InputError("cannot train a forest on an empty dataset");
  if (config.n_trees < 1) throw ConfigError("forest needs at least one tree");
  bool has[2] = {false, false};
  for (const auto& d : data) {
    if (d.label != 0 && d.label != 1) throw InputError("forest labels must be 0 or 1");
    has[d.label] = true;
  }
  if (!(has[0] && has[1]) && !config.allow_single_class)
    throw InputError("forest training data contains a single class");

  ForestClassifier forest;
  forest.config = config;
  std::mt19937_64 seeder(config.seed);
  std::vector<std::size_t> rows(data.size());
  for (int t = 0; t < config.n_trees; ++t) {
    const std::uint64_t tree_seed = seeder();
    std::mt19937_64 rng(tree_seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (auto& r : rows) r = pick(rng);
    forest.tree_seeds.push_back(tree_seed);
    forest.trees.push_back(grow_tree(data, rows, config, rng()));
  }
  return forest;
}

int forest_predict(const ForestClassifier& forest, std::span<const double> features) {
  if (features.size() != kFeatureCount)
    throw ConfigError("forest expects " + std::to_string(kFeatureCount) + " features, got " +
                      std::to_string(features.size()));
  FeatureVector x;
  std::copy(features.begin(), features.end(), x.begin());
  return forest.predict(x);
}

namespace {

constexpr const char* kForestFormat = "procguard-forest/1";

}  // namespace

std::string serialize(const ForestClassifier& forest) {
  nlohmann::ordered_json j;
  j["format"] = kForestFormat;
  j["config"] = {{"n_trees", forest.config.n_trees},
                 {"max_depth", forest.config.max_depth},
                 {"min_samples_leaf", forest.config.min_samples_leaf},
                 {"features_per_split", forest.config.features_per_split},
                 {"seed", forest.config.seed},
                 {"allow_single_class", forest.config.allow_single_class}};
  j["tree_seeds"] = forest.tree_seeds;
  // Node tuples: [feature, threshold, left, right, class]; feature -1 is a leaf.
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : forest.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes())
      nodes.push_back(nlohmann::ordered_json::array({n.feature, n.threshold, n.left, n.right, n.leaf_class}));
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

ForestClassifier deserialize_forest(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("forest file is not valid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kForestFormat)
    throw InputError(std::string("forest file is not tagged ") + kForestFormat);
  try {
    ForestClassifier forest;
    const auto& c = j.at("config");
    forest.config.n_trees = c.at("n_trees").get<int>();
    forest.config.max_depth = c.at("max_depth").get<int>();
    forest.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
    forest.config.features_per_split = c.at("features_per_split").get<int>();
    forest.config.seed = c.at("seed").get<std::uint64_t>();
    forest.config.allow_single_class = c.at("allow_single_class").get<bool>();
    forest.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& jt : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& jn : jt)
        nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(), jn.at(3).get<int>(),
                         jn.at(4).get<int>()});
      forest.trees.emplace_back(std::move(nodes));
    }
    if (forest.trees.empty()) throw InputError("forest file holds no trees");
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed forest file: ") + e.what());
  }
}

void save(const ForestClassifier& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << serialize(forest);
}

ForestClassifier load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read forest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_forest(ss.str());
}

}  // namespace procguard
