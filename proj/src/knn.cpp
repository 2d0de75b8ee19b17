#include "rcx/models/knn.hpp"

#include <algorithm>

#include "rcx/errors.hpp"
#include "rcx/types.hpp"

namespace rcx {

int knn_predict(const Eigen::MatrixXd& train_X,
                const std::vector<int>& train_classes,
                const Eigen::RowVectorXd& query, const KnnConfig& config) {
  if (train_X.rows() == 0) throw EmptyTrainSet("knn has no train rows");
  if (config.k < 1) throw Error("knn k must be >= 1");
  const Eigen::Index n = train_X.rows();
  const int k = std::min<int>(config.k, static_cast<int>(n));

  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    dist[static_cast<std::size_t>(r)] = {
        (train_X.row(r) - query).squaredNorm(), static_cast<int>(r)};
  }
  // (distance, row order) pairs sort ties to the earlier row.
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  std::array<int, 3> votes{};
  for (int i = 0; i < k; ++i) {
    votes[static_cast<std::size_t>(
        train_classes[static_cast<std::size_t>(
            dist[static_cast<std::size_t>(i)].second)])] += 1;
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

std::vector<int> knn_predict_batch(const Eigen::MatrixXd& train_X,
                                   const std::vector<int>& train_classes,
                                   const Eigen::MatrixXd& queries,
                                   const KnnConfig& config) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index r = 0; r < queries.rows(); ++r) {
    out.push_back(knn_predict(train_X, train_classes, queries.row(r), config));
  }
  return out;
}

}  // namespace rcx
