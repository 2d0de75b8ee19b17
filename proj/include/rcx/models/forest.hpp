#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <vector>

#include "rcx/models/tree.hpp"

namespace rcx {

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 12;
  int min_leaf = 2;
  // <= 0 selects round(sqrt(d)) features per split.
  int features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct RandomForest {
  ForestConfig config;
  std::vector<Tree> trees;
  // Out-of-bag accuracy (percent) over the training rows, when bootstrap
  // sampling left any row out.
  std::optional<double> oob_accuracy;

  /// Majority vote over trees; ties resolve to the lowest class index.
  int predict(const Eigen::RowVectorXd& row) const;
  std::vector<int> predict_batch(const Eigen::MatrixXd& X) const;

  /// Vote fractions per class.
  std::array<double, 3> predict_proba(const Eigen::RowVectorXd& row) const;
};

/// Grows `n_trees` Gini trees on bootstrap resamples of `train_rows`
/// (per-tree seed = seed + tree index). Throws EmptyTrainSet.
RandomForest train_rf(const Eigen::MatrixXd& X,
                      const std::vector<int>& classes,
                      const std::vector<int>& train_rows,
                      const ForestConfig& config);

void save_forest(const RandomForest& forest,
                 const std::filesystem::path& path,
                 const std::string& config_hash = "");
RandomForest load_forest(const std::filesystem::path& path);

}  // namespace rcx
