#include "rcx/models/forest.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "rcx/errors.hpp"

namespace rcx {

int RandomForest::predict(const Eigen::RowVectorXd& row) const {
  std::array<int, 3> votes{};
  for (const auto& tree : trees) {
    votes[static_cast<std::size_t>(tree.predict_class(row))] += 1;
  }
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (votes[static_cast<std::size_t>(c)] >
        votes[static_cast<std::size_t>(best)]) {
      best = c;
    }
  }
  return best;
}

std::vector<int> RandomForest::predict_batch(const Eigen::MatrixXd& X) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    out.push_back(predict(X.row(r)));
  }
  return out;
}

std::array<double, 3> RandomForest::predict_proba(
    const Eigen::RowVectorXd& row) const {
  std::array<double, 3> votes{};
  for (const auto& tree : trees) {
    votes[static_cast<std::size_t>(tree.predict_class(row))] += 1.0;
  }
  for (auto& v : votes) v /= static_cast<double>(trees.size());
  return votes;
}

RandomForest train_rf(const Eigen::MatrixXd& X,
                      const std::vector<int>& classes,
                      const std::vector<int>& train_rows,
                      const ForestConfig& config) {
  if (train_rows.empty()) throw EmptyTrainSet("random forest has no rows");
  RandomForest forest;
  forest.config = config;

  TreeGrowOptions opts;
  opts.criterion = SplitCriterion::gini;
  opts.max_depth = config.max_depth;
  opts.min_leaf = config.min_leaf;
  opts.features_per_split =
      config.features_per_split > 0
          ? config.features_per_split
          : static_cast<int>(std::lround(
                std::sqrt(static_cast<double>(X.cols()))));

  const std::size_t n = train_rows.size();
  // Out-of-bag majority votes accumulated over trees.
  std::vector<std::array<int, 3>> oob_votes(n, std::array<int, 3>{});
  std::vector<char> in_bag(n, 0);

  for (int t = 0; t < config.n_trees; ++t) {
    SplitMix64 rng(config.seed + static_cast<std::uint64_t>(t));
    std::vector<int> rows;
    rows.reserve(n);
    if (config.bootstrap) {
      std::fill(in_bag.begin(), in_bag.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(rng.next_below(n));
        rows.push_back(train_rows[j]);
        in_bag[j] = 1;
      }
    } else {
      rows = train_rows;
      std::fill(in_bag.begin(), in_bag.end(), 1);
    }
    Tree tree = grow_tree(X, rows, classes, Eigen::VectorXd(), opts, rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_bag[i]) {
        const int cls = tree.predict_class(X.row(train_rows[i]));
        oob_votes[i][static_cast<std::size_t>(cls)] += 1;
      }
    }
    forest.trees.push_back(std::move(tree));
  }

  int oob_correct = 0, oob_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& votes = oob_votes[i];
    if (votes[0] + votes[1] + votes[2] == 0) continue;
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (votes[static_cast<std::size_t>(c)] >
          votes[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    ++oob_total;
    oob_correct += (best == classes[static_cast<std::size_t>(train_rows[i])]);
  }
  if (oob_total > 0) {
    forest.oob_accuracy = 100.0 * static_cast<double>(oob_correct) /
                          static_cast<double>(oob_total);
  }
  return forest;
}

namespace {

nlohmann::json tree_to_json(const Tree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value},
                     {"class_counts", n.class_counts}});
  }
  return nodes;
}

Tree tree_from_json(const nlohmann::json& nodes) {
  Tree tree;
  for (const auto& n : nodes) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.value = n.at("value").get<double>();
    const auto& cc = n.at("class_counts");
    for (int c = 0; c < 3; ++c) {
      node.class_counts[static_cast<std::size_t>(c)] =
          cc.at(static_cast<std::size_t>(c)).get<double>();
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

void save_forest(const RandomForest& forest,
                 const std::filesystem::path& path,
                 const std::string& config_hash) {
  nlohmann::json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["model"] = "random_forest";
  j["config"] = {{"n_trees", forest.config.n_trees},
                 {"max_depth", forest.config.max_depth},
                 {"min_leaf", forest.config.min_leaf},
                 {"features_per_split", forest.config.features_per_split},
                 {"bootstrap", forest.config.bootstrap},
                 {"seed", forest.config.seed}};
  if (forest.oob_accuracy) j["oob_accuracy"] = *forest.oob_accuracy;
  j["trees"] = nlohmann::json::array();
  for (const auto& t : forest.trees) j["trees"].push_back(tree_to_json(t));
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << "\n";
}

RandomForest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  RandomForest forest;
  const auto& c = j.at("config");
  forest.config.n_trees = c.at("n_trees").get<int>();
  forest.config.max_depth = c.at("max_depth").get<int>();
  forest.config.min_leaf = c.at("min_leaf").get<int>();
  forest.config.features_per_split = c.at("features_per_split").get<int>();
  forest.config.bootstrap = c.at("bootstrap").get<bool>();
  forest.config.seed = c.at("seed").get<std::uint64_t>();
  if (j.contains("oob_accuracy")) {
    forest.oob_accuracy = j.at("oob_accuracy").get<double>();
  }
  for (const auto& t : j.at("trees")) {
    forest.trees.push_back(tree_from_json(t));
  }
  return forest;
}

}  // namespace rcx
