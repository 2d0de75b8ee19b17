#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <vector>

#include "rcx/models/tree.hpp"

namespace rcx {

struct GbdtConfig {
  int n_rounds = 150;
  double learning_rate = 0.1;  // in (0, 1]
  int max_depth = 3;
  std::uint64_t seed = 0;
};

// One-vs-rest multinomial boosting: per round and class, a depth-limited
// regression tree is fitted to the softmax residual (indicator - probability)
// and added to that class's score with the learning rate.
struct GbdtModel {
  GbdtConfig config;
  std::array<double, 3> base_score{};  // log class priors
  std::vector<std::array<Tree, 3>> rounds;
  std::vector<double> train_ce;  // training cross-entropy after each round

  Eigen::Vector3d score(const Eigen::RowVectorXd& row) const;
  /// argmax of summed scores; ties resolve to the lowest class index.
  int predict(const Eigen::RowVectorXd& row) const;
  std::vector<int> predict_batch(const Eigen::MatrixXd& X) const;
};

GbdtModel train_gbdt(const Eigen::MatrixXd& X,
                     const std::vector<int>& classes,
                     const std::vector<int>& train_rows,
                     const GbdtConfig& config);

void save_gbdt(const GbdtModel& model, const std::filesystem::path& path,
               const std::string& config_hash = "");
GbdtModel load_gbdt(const std::filesystem::path& path);

}  // namespace rcx
