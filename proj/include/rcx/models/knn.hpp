#pragma once

#include <Eigen/Core>
#include <vector>

namespace rcx {

struct KnnConfig {
  int k = 5;  // odd by default; >= 1
};

/// Majority label among the k nearest train rows by Euclidean distance on
/// (min-max scaled) features. Distance ties are broken by row order, vote
/// ties by the smallest class index.
int knn_predict(const Eigen::MatrixXd& train_X,
                const std::vector<int>& train_classes,
                const Eigen::RowVectorXd& query, const KnnConfig& config);

std::vector<int> knn_predict_batch(const Eigen::MatrixXd& train_X,
                                   const std::vector<int>& train_classes,
                                   const Eigen::MatrixXd& queries,
                                   const KnnConfig& config);

}  // namespace rcx
