#pragma once

#include <array>
#include <vector>

#include "rcx/types.hpp"

namespace rcx {

/// Percent correct: 100 * correct / total. Throws LengthMismatch when the
/// lengths differ or are zero.
double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

struct ComparisonResult {
  double accuracy_a = 0.0;  // percent
  double accuracy_b = 0.0;
  double chi2 = 0.0;
  double p_value = 1.0;
  long b = 0;  // a correct, b wrong
  long c = 0;  // a wrong, b correct
};

/// McNemar's test on paired predictions. chi2 is the continuity-corrected
/// statistic (|b-c| - 1)^2 / (b+c); the p-value comes from the chi-square
/// survival function with 1 dof, p = erfc(sqrt(chi2 / 2)). Below 25
/// discordant pairs the p-value switches to the exact two-sided binomial.
/// Throws LengthMismatch / NoDiscordantPairs.
ComparisonResult mcnemar(const std::vector<int>& preds_a,
                         const std::vector<int>& preds_b,
                         const std::vector<int>& labels);

/// 3x3 counts, rows = true class, columns = predicted class.
std::array<std::array<long, 3>, 3> confusion_matrix(
    const std::vector<int>& preds, const std::vector<int>& labels);

/// Survival function of the chi-square distribution with one degree of
/// freedom: P(X > x) = erfc(sqrt(x/2)).
double chi2_sf_1dof(double x);

}  // namespace rcx
