#include "rcx/models/gbdt.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "rcx/errors.hpp"

namespace rcx {

Eigen::Vector3d GbdtModel::score(const Eigen::RowVectorXd& row) const {
  Eigen::Vector3d s(base_score[0], base_score[1], base_score[2]);
  for (const auto& round : rounds) {
    for (int k = 0; k < 3; ++k) {
      s(k) += config.learning_rate *
              round[static_cast<std::size_t>(k)].predict_value(row);
    }
  }
  return s;
}

int GbdtModel::predict(const Eigen::RowVectorXd& row) const {
  const Eigen::Vector3d s = score(row);
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (s(k) > s(best)) best = k;
  }
  return best;
}

std::vector<int> GbdtModel::predict_batch(const Eigen::MatrixXd& X) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) out.push_back(predict(X.row(r)));
  return out;
}

namespace {

double train_cross_entropy(const Eigen::MatrixXd& F,
                           const std::vector<int>& classes,
                           const std::vector<int>& rows) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const double m = F.row(r).maxCoeff();
    const double denom = (F.row(r).array() - m).exp().sum();
    const int y = classes[static_cast<std::size_t>(rows[i])];
    sum -= F(r, y) - m - std::log(denom);
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace

GbdtModel train_gbdt(const Eigen::MatrixXd& X,
                     const std::vector<int>& classes,
                     const std::vector<int>& train_rows,
                     const GbdtConfig& config) {
  if (train_rows.empty()) throw EmptyTrainSet("gbdt has no rows");
  if (!(config.learning_rate >= 0.0 && config.learning_rate <= 1.0)) {
    throw Error("gbdt learning rate must be in [0,1]");
  }
  GbdtModel model;
  model.config = config;

  const std::size_t n = train_rows.size();
  std::array<double, 3> prior{};
  for (const int r : train_rows) {
    prior[static_cast<std::size_t>(classes[static_cast<std::size_t>(r)])] +=
        1.0;
  }
  for (int k = 0; k < 3; ++k) {
    // Laplace-smoothed log prior keeps absent classes finite.
    model.base_score[static_cast<std::size_t>(k)] =
        std::log((prior[static_cast<std::size_t>(k)] + 1.0) /
                 (static_cast<double>(n) + 3.0));
  }

  Eigen::MatrixXd F(static_cast<Eigen::Index>(n), 3);
  for (int k = 0; k < 3; ++k) {
    F.col(k).setConstant(model.base_score[static_cast<std::size_t>(k)]);
  }

  TreeGrowOptions opts;
  opts.criterion = SplitCriterion::mse;
  opts.max_depth = config.max_depth;
  opts.min_leaf = 1;
  opts.features_per_split = 0;  // all features; growth is deterministic

  // Residual targets are indexed by the global row ids the tree grower sees.
  Eigen::VectorXd residual(X.rows());
  residual.setZero();
  SplitMix64 rng(config.seed);

  for (int round = 0; round < config.n_rounds; ++round) {
    Eigen::MatrixXd P(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index r = 0; r < P.rows(); ++r) {
      const double m = F.row(r).maxCoeff();
      P.row(r) = (F.row(r).array() - m).exp();
      P.row(r) /= P.row(r).sum();
    }
    std::array<Tree, 3> trees;
    for (int k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const int y = classes[static_cast<std::size_t>(train_rows[i])];
        residual(train_rows[i]) =
            (y == k ? 1.0 : 0.0) - P(static_cast<Eigen::Index>(i), k);
      }
      trees[static_cast<std::size_t>(k)] =
          grow_tree(X, train_rows, classes, residual, opts, rng);
      for (std::size_t i = 0; i < n; ++i) {
        F(static_cast<Eigen::Index>(i), k) +=
            config.learning_rate *
            trees[static_cast<std::size_t>(k)].predict_value(
                X.row(train_rows[i]));
      }
    }
    model.rounds.push_back(std::move(trees));
    model.train_ce.push_back(train_cross_entropy(F, classes, train_rows));
  }
  return model;
}

namespace {

nlohmann::json tree_to_json(const Tree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value}});
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
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

void save_gbdt(const GbdtModel& model, const std::filesystem::path& path,
               const std::string& config_hash) {
  nlohmann::json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["model"] = "gbdt";
  j["config"] = {{"n_rounds", model.config.n_rounds},
                 {"learning_rate", model.config.learning_rate},
                 {"max_depth", model.config.max_depth},
                 {"seed", model.config.seed}};
  j["base_score"] = model.base_score;
  j["rounds"] = nlohmann::json::array();
  for (const auto& round : model.rounds) {
    j["rounds"].push_back({tree_to_json(round[0]), tree_to_json(round[1]),
                           tree_to_json(round[2])});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << "\n";
}

GbdtModel load_gbdt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  GbdtModel model;
  const auto& c = j.at("config");
  model.config.n_rounds = c.at("n_rounds").get<int>();
  model.config.learning_rate = c.at("learning_rate").get<double>();
  model.config.max_depth = c.at("max_depth").get<int>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  for (int k = 0; k < 3; ++k) {
    model.base_score[static_cast<std::size_t>(k)] =
        j.at("base_score").at(static_cast<std::size_t>(k)).get<double>();
  }
  for (const auto& round : j.at("rounds")) {
    model.rounds.push_back({tree_from_json(round.at(0)),
                            tree_from_json(round.at(1)),
                            tree_from_json(round.at(2))});
  }
  return model;
}

}  // namespace rcx
