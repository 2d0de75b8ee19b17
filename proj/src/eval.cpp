#include "rcx/eval.hpp"

#include <algorithm>
#include <cmath>

#include "rcx/errors.hpp"

namespace rcx {

double accuracy(const std::vector<int>& preds,
                const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw LengthMismatch("accuracy over " + std::to_string(preds.size()) +
                         " predictions and " + std::to_string(labels.size()) +
                         " labels");
  }
  int correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    correct += (preds[i] == labels[i]);
  }
  return 100.0 * static_cast<double>(correct) /
         static_cast<double>(preds.size());
}

double chi2_sf_1dof(double x) { return std::erfc(std::sqrt(x / 2.0)); }

namespace {

// Exact two-sided binomial test at p = 1/2 for n discordant pairs.
double binomial_two_sided_p(long k_min, long n) {
  // Sum of C(n, k) / 2^n for k = 0..k_min, doubled (symmetric null).
  double term = std::pow(0.5, static_cast<double>(n));  // C(n,0)/2^n
  double tail = term;
  for (long k = 1; k <= k_min; ++k) {
    term *= static_cast<double>(n - k + 1) / static_cast<double>(k);
    tail += term;
  }
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

ComparisonResult mcnemar(const std::vector<int>& preds_a,
                         const std::vector<int>& preds_b,
                         const std::vector<int>& labels) {
  if (preds_a.size() != labels.size() || preds_b.size() != labels.size() ||
      labels.empty()) {
    throw LengthMismatch("mcnemar inputs must share one nonzero length");
  }
  ComparisonResult r;
  r.accuracy_a = accuracy(preds_a, labels);
  r.accuracy_b = accuracy(preds_b, labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_ok = preds_a[i] == labels[i];
    const bool b_ok = preds_b[i] == labels[i];
    r.b += (a_ok && !b_ok);
    r.c += (!a_ok && b_ok);
  }
  const long n = r.b + r.c;
  if (n < 1) {
    throw NoDiscordantPairs("the classifiers disagree on no test instance");
  }
  const double diff = std::abs(static_cast<double>(r.b - r.c));
  // (|b-c| - 1)^2 / (b+c); at b = c this is 1/(b+c) by construction.
  r.chi2 = (diff - 1.0) * (diff - 1.0) / static_cast<double>(n);
  if (n >= 25) {
    r.p_value = chi2_sf_1dof(r.chi2);
  } else {
    r.p_value = binomial_two_sided_p(std::min(r.b, r.c), n);
  }
  return r;
}

std::array<std::array<long, 3>, 3> confusion_matrix(
    const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw LengthMismatch("confusion matrix needs equal-length inputs");
  }
  std::array<std::array<long, 3>, 3> m{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= 3 || preds[i] < 0 || preds[i] >= 3) {
      throw LengthMismatch("class index outside {0,1,2}");
    }
    m[static_cast<std::size_t>(labels[i])]
     [static_cast<std::size_t>(preds[i])] += 1;
  }
  return m;
}

}  // namespace rcx
