#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace rcx {

using RowPredictFn = std::function<int(const Eigen::RowVectorXd&)>;
using RowScoreFn = std::function<double(const Eigen::RowVectorXd&)>;

struct Attribution {
  std::vector<std::string> features;
  std::vector<double> scores;
  std::string method;      // "permutation" or "shapley_exact"
  double baseline = 0.0;   // baseline accuracy (%) or expected model output
};

/// importance(f) = baseline test accuracy - mean accuracy with column f
/// permuted (seeded per feature and repeat), both in percent.
/// Throws TooFewRows below 30 test rows.
Attribution permutation_importance(const RowPredictFn& model,
                                   const Eigen::MatrixXd& X_test,
                                   const std::vector<int>& y_test,
                                   const std::vector<std::string>& names,
                                   std::uint64_t seed, int repeats = 5);

/// Exact Shapley values over `subset` (at most 12 features; the remaining
/// features always keep the instance's values). The coalition value is the
/// model score with coalition features from the instance and the rest from
/// background rows, averaged over the background. Throws SubsetTooLarge.
std::vector<double> shapley_exact(const RowScoreFn& model,
                                  const Eigen::RowVectorXd& instance,
                                  const Eigen::MatrixXd& background,
                                  const std::vector<int>& subset);

/// Indices ranked by descending |score|; equal scores keep schema order.
/// k larger than the feature count returns the full ranking.
std::vector<int> top_k_features(const Attribution& attribution, int k = 10);

/// Attribution report CSV: feature,method,score,rank (rank over all
/// features in top_k order).
void write_attribution_csv(const Attribution& attribution,
                           const std::filesystem::path& path,
                           const std::string& config_hash = "");

}  // namespace rcx
