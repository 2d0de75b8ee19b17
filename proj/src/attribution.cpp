#include "rcx/models/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "rcx/csv.hpp"
#include "rcx/errors.hpp"
#include "rcx/rng.hpp"

namespace rcx {

namespace {

double accuracy_pct(const std::vector<int>& preds,
                    const std::vector<int>& labels) {
  int correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += (preds[i] == labels[i]);
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(preds.size());
}

std::vector<int> predict_all(const RowPredictFn& model,
                             const Eigen::MatrixXd& X) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) out.push_back(model(X.row(r)));
  return out;
}

}  // namespace

Attribution permutation_importance(const RowPredictFn& model,
                                   const Eigen::MatrixXd& X_test,
                                   const std::vector<int>& y_test,
                                   const std::vector<std::string>& names,
                                   std::uint64_t seed, int repeats) {
  const Eigen::Index n = X_test.rows();
  if (n < 30) {
    throw TooFewRows("permutation importance needs >= 30 test rows, got " +
                     std::to_string(n));
  }
  if (X_test.cols() != static_cast<Eigen::Index>(names.size())) {
    throw Error("permutation importance: name/column count mismatch");
  }
  Attribution attr;
  attr.features = names;
  attr.method = "permutation";
  attr.baseline = accuracy_pct(predict_all(model, X_test), y_test);

  Eigen::MatrixXd X_perm = X_test;
  for (Eigen::Index f = 0; f < X_test.cols(); ++f) {
    double total = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      SplitMix64 rng(seed +
                     static_cast<std::uint64_t>(f) *
                         static_cast<std::uint64_t>(repeats) +
                     static_cast<std::uint64_t>(rep));
      const std::vector<int> order =
          shuffled_indices(static_cast<int>(n), rng);
      for (Eigen::Index r = 0; r < n; ++r) {
        X_perm(r, f) = X_test(order[static_cast<std::size_t>(r)], f);
      }
      total += accuracy_pct(predict_all(model, X_perm), y_test);
    }
    X_perm.col(f) = X_test.col(f);
    attr.scores.push_back(attr.baseline -
                          total / static_cast<double>(repeats));
  }
  return attr;
}

std::vector<double> shapley_exact(const RowScoreFn& model,
                                  const Eigen::RowVectorXd& instance,
                                  const Eigen::MatrixXd& background,
                                  const std::vector<int>& subset) {
  const int m = static_cast<int>(subset.size());
  if (m > 12) {
    throw SubsetTooLarge("exact Shapley enumerates 2^|S| coalitions; |S| = " +
                         std::to_string(m) + " > 12");
  }
  if (background.rows() == 0) {
    throw Error("shapley_exact needs at least one background row");
  }

  // Coalition values v[mask]: instance values inside the coalition,
  // background values for subset features outside it, averaged over rows.
  const std::size_t n_masks = std::size_t{1} << m;
  std::vector<double> v(n_masks, 0.0);
  Eigen::RowVectorXd x = instance;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    double sum = 0.0;
    for (Eigen::Index b = 0; b < background.rows(); ++b) {
      x = instance;
      for (int i = 0; i < m; ++i) {
        if (!(mask & (std::size_t{1} << i))) {
          x(subset[static_cast<std::size_t>(i)]) =
              background(b, subset[static_cast<std::size_t>(i)]);
        }
      }
      sum += model(x);
    }
    v[mask] = sum / static_cast<double>(background.rows());
  }

  std::vector<double> factorial(static_cast<std::size_t>(m) + 1, 1.0);
  for (int i = 1; i <= m; ++i) {
    factorial[static_cast<std::size_t>(i)] =
        factorial[static_cast<std::size_t>(i - 1)] * static_cast<double>(i);
  }

  std::vector<double> phi(subset.size(), 0.0);
  for (int i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const int s = static_cast<int>(std::popcount(mask));
      const double weight = factorial[static_cast<std::size_t>(s)] *
                            factorial[static_cast<std::size_t>(m - s - 1)] /
                            factorial[static_cast<std::size_t>(m)];
      phi[static_cast<std::size_t>(i)] +=
          weight * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

std::vector<int> top_k_features(const Attribution& attribution, int k) {
  std::vector<int> order(attribution.scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<int>(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(attribution.scores[static_cast<std::size_t>(a)]) >
           std::abs(attribution.scores[static_cast<std::size_t>(b)]);
  });
  if (k < static_cast<int>(order.size())) {
    order.resize(static_cast<std::size_t>(k));
  }
  return order;
}

void write_attribution_csv(const Attribution& attribution,
                           const std::filesystem::path& path,
                           const std::string& config_hash) {
  auto out = open_output(path);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "feature,method,score,rank\n";
  const std::vector<int> order = top_k_features(
      attribution, static_cast<int>(attribution.scores.size()));
  std::vector<int> rank(attribution.scores.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i) + 1;
  }
  for (std::size_t i = 0; i < attribution.features.size(); ++i) {
    out << attribution.features[i] << "," << attribution.method << ","
        << fmt_g9(attribution.scores[i]) << "," << rank[i] << "\n";
  }
}

}  // namespace rcx
