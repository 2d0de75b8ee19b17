#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "rcx/rng.hpp"
#include "rcx/types.hpp"

namespace rcx {

// One binary decision tree over dense rows, grown greedily. Serves both the
// forest (Gini, class-count leaves) and the boosting stage (variance
// reduction, mean-value leaves).
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;                       // regression leaf
  std::array<double, 3> class_counts{};     // classification leaf
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  int leaf_for(const Row& row) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const TreeNode& node = nodes[static_cast<std::size_t>(n)];
      n = row(node.feature) <= node.threshold ? node.left : node.right;
    }
    return n;
  }

  template <typename Row>
  double predict_value(const Row& row) const {
    return nodes[static_cast<std::size_t>(leaf_for(row))].value;
  }

  /// Majority class of the leaf; ties resolve to the lowest class index.
  template <typename Row>
  int predict_class(const Row& row) const {
    const auto& counts =
        nodes[static_cast<std::size_t>(leaf_for(row))].class_counts;
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (counts[static_cast<std::size_t>(c)] >
          counts[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    return best;
  }

  /// Leaf class distribution (counts normalized to 1).
  template <typename Row>
  std::array<double, 3> predict_proba(const Row& row) const {
    auto counts =
        nodes[static_cast<std::size_t>(leaf_for(row))].class_counts;
    double total = counts[0] + counts[1] + counts[2];
    if (total <= 0.0) total = 1.0;
    for (auto& c : counts) c /= total;
    return counts;
  }

  /// True when `feature` appears on any internal node.
  bool uses_feature(int feature) const;
};

enum class SplitCriterion { gini, mse };

struct TreeGrowOptions {
  SplitCriterion criterion = SplitCriterion::gini;
  int max_depth = 12;
  int min_leaf = 2;
  // Features examined per split; <= 0 means all. Subsets are drawn from the
  // provided generator, so growth is deterministic per seed.
  int features_per_split = 0;
};

/// Grows a tree on X(rows in `row_idx`). For gini, `classes` holds labels;
/// for mse, `targets` holds regression values. `rng` is only consulted when
/// features_per_split limits the candidate set.
Tree grow_tree(const Eigen::MatrixXd& X, const std::vector<int>& row_idx,
               const std::vector<int>& classes,
               const Eigen::VectorXd& targets, const TreeGrowOptions& options,
               SplitMix64& rng);

}  // namespace rcx
