#include "rcx/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcx/errors.hpp"

namespace rcx {

bool Tree::uses_feature(int feature) const {
  for (const auto& n : nodes) {
    if (n.feature == feature) return true;
  }
  return false;
}

namespace {

constexpr double kMinGain = 1e-12;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double child_impurity = std::numeric_limits<double>::infinity();
};

double gini_of(const std::array<double, 3>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double g = 1.0;
  for (const double c : counts) g -= (c / total) * (c / total);
  return g;
}

struct Grower {
  const Eigen::MatrixXd& X;
  const std::vector<int>& classes;
  const Eigen::VectorXd& targets;
  const TreeGrowOptions& options;
  SplitMix64& rng;
  Tree tree;
  std::vector<int> feature_pool;
  std::vector<std::pair<double, int>> scratch;

  // Candidate features for one split, drawn without replacement.
  std::vector<int> sample_features() {
    const int d = static_cast<int>(X.cols());
    const int k = options.features_per_split;
    if (k <= 0 || k >= d) {
      std::vector<int> all(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;
      return all;
    }
    if (feature_pool.size() != static_cast<std::size_t>(d)) {
      feature_pool.resize(static_cast<std::size_t>(d));
    }
    for (int i = 0; i < d; ++i) feature_pool[static_cast<std::size_t>(i)] = i;
    std::vector<int> chosen(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(
          i + static_cast<int>(rng.next_below(
                  static_cast<std::uint64_t>(d - i))));
      std::swap(feature_pool[static_cast<std::size_t>(i)], feature_pool[j]);
      chosen[static_cast<std::size_t>(i)] =
          feature_pool[static_cast<std::size_t>(i)];
    }
    return chosen;
  }

  SplitChoice best_split(const std::vector<int>& rows,
                         double parent_impurity) {
    SplitChoice best;
    const std::size_t n = rows.size();
    scratch.resize(n);

    // Statistics that do not depend on the candidate feature.
    std::array<double, 3> total{};
    double sum_total = 0.0, sq_total = 0.0;
    if (options.criterion == SplitCriterion::gini) {
      for (const int r : rows) {
        total[static_cast<std::size_t>(
            classes[static_cast<std::size_t>(r)])] += 1.0;
      }
    } else {
      for (const int r : rows) {
        sum_total += targets(r);
        sq_total += targets(r) * targets(r);
      }
    }

    for (const int f : sample_features()) {
      const double* col = X.col(f).data();
      for (std::size_t i = 0; i < n; ++i) {
        scratch[i] = {col[rows[i]], rows[i]};
      }
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (scratch.front().first == scratch.back().first) continue;

      if (options.criterion == SplitCriterion::gini) {
        std::array<double, 3> left{};
        for (std::size_t i = 0; i + 1 < n; ++i) {
          left[static_cast<std::size_t>(
              classes[static_cast<std::size_t>(scratch[i].second)])] += 1.0;
          if (scratch[i].first == scratch[i + 1].first) continue;
          const double nl = static_cast<double>(i + 1);
          const double nr = static_cast<double>(n) - nl;
          if (nl < options.min_leaf || nr < options.min_leaf) continue;
          std::array<double, 3> right{};
          for (int c = 0; c < 3; ++c) {
            right[static_cast<std::size_t>(c)] =
                total[static_cast<std::size_t>(c)] -
                left[static_cast<std::size_t>(c)];
          }
          const double imp = (nl * gini_of(left, nl) +
                              nr * gini_of(right, nr)) /
                             static_cast<double>(n);
          if (imp < best.child_impurity) {
            best = {f, (scratch[i].first + scratch[i + 1].first) / 2.0, imp};
          }
        }
      } else {
        double sum_left = 0.0, sq_left = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double t = targets(scratch[i].second);
          sum_left += t;
          sq_left += t * t;
          if (scratch[i].first == scratch[i + 1].first) continue;
          const double nl = static_cast<double>(i + 1);
          const double nr = static_cast<double>(n) - nl;
          if (nl < options.min_leaf || nr < options.min_leaf) continue;
          const double sse_left = sq_left - sum_left * sum_left / nl;
          const double sum_right = sum_total - sum_left;
          const double sse_right =
              (sq_total - sq_left) - sum_right * sum_right / nr;
          const double imp = (sse_left + sse_right) / static_cast<double>(n);
          if (imp < best.child_impurity) {
            best = {f, (scratch[i].first + scratch[i + 1].first) / 2.0, imp};
          }
        }
      }
    }
    if (best.feature >= 0 &&
        best.child_impurity < parent_impurity - kMinGain) {
      return best;
    }
    return SplitChoice{};
  }

  int make_leaf(const std::vector<int>& rows) {
    TreeNode leaf;
    if (options.criterion == SplitCriterion::gini) {
      for (const int r : rows) {
        leaf.class_counts[static_cast<std::size_t>(
            classes[static_cast<std::size_t>(r)])] += 1.0;
      }
    } else {
      double sum = 0.0;
      for (const int r : rows) sum += targets(r);
      leaf.value = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
    }
    tree.nodes.push_back(leaf);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  int grow(const std::vector<int>& rows, int depth) {
    double parent_impurity;
    if (options.criterion == SplitCriterion::gini) {
      std::array<double, 3> counts{};
      for (const int r : rows) {
        counts[static_cast<std::size_t>(
            classes[static_cast<std::size_t>(r)])] += 1.0;
      }
      parent_impurity = gini_of(counts, static_cast<double>(rows.size()));
    } else {
      double sum = 0.0, sq = 0.0;
      for (const int r : rows) {
        sum += targets(r);
        sq += targets(r) * targets(r);
      }
      const double n = static_cast<double>(rows.size());
      parent_impurity = (sq - sum * sum / n) / n;
    }

    if (depth >= options.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(options.min_leaf) ||
        parent_impurity <= kMinGain) {
      return make_leaf(rows);
    }
    const SplitChoice split = best_split(rows, parent_impurity);
    if (split.feature < 0) return make_leaf(rows);

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (const int r : rows) {
      (X(r, split.feature) <= split.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{split.feature, split.threshold, -1, -1,
                                  0.0, {}});
    const int left = grow(left_rows, depth + 1);
    const int right = grow(right_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_index)].left = left;
    tree.nodes[static_cast<std::size_t>(node_index)].right = right;
    return node_index;
  }
};

}  // namespace

Tree grow_tree(const Eigen::MatrixXd& X, const std::vector<int>& row_idx,
               const std::vector<int>& classes,
               const Eigen::VectorXd& targets, const TreeGrowOptions& options,
               SplitMix64& rng) {
  if (row_idx.empty()) throw EmptyTrainSet("cannot grow a tree on no rows");
  Grower grower{X, classes, targets, options, rng, {}, {}};
  grower.grow(row_idx, 0);
  return std::move(grower.tree);
}

}  // namespace rcx
