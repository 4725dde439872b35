#pragma once

#include "mlr/core.hpp"

#include <vector>

namespace mlr {

/// 1 - ||y - yhat||^2 / ||y - mean(y)||^2. With squared = false the two
/// norms enter unsquared. Throws for constant y_true or length mismatch.
double r2_score(const VectorXd& y_true, const VectorXd& y_pred, bool squared = true);

double l2_error(const VectorXd& beta_hat, const VectorXd& beta_star);

struct SupportEstimate {
  std::vector<Index> indices;  // { j : |beta_j| > threshold }, ascending
  double threshold = 1e-3;
};

SupportEstimate estimate_support(const VectorXd& beta_hat, double tau = 1e-3);

/// Fraction of coordinates whose zero/non-zero status under |beta_hat_j| > tau
/// agrees with beta_star_j != 0.
double support_accuracy(const VectorXd& beta_hat, const VectorXd& beta_star, double tau = 1e-3);

/// (v - min) / (max - min). Throws on fewer than two values or a constant
/// sequence.
std::vector<double> rescale_curve(const std::vector<double>& values);

struct MannWhitneyResult {
  double u = 0.0;        // U of sample a, midranks for ties
  double p_value = 1.0;  // two-sided
  bool exact = false;
};

/// Two-sided Mann-Whitney U test. Exact permutation distribution of the
/// midrank sum when min(n_a, n_b) <= exact_limit, otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 int exact_limit = 8);

/// best[i] is true when no other sample beats sample i, i.e. differs at
/// two-sided p < alpha in the preferred direction.
std::vector<bool> mw_best_set(const std::vector<std::vector<double>>& samples,
                              bool higher_is_better, double alpha = 0.05);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd, 0 for count < 2
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Quantiles use linear interpolation between order statistics. Non-finite
/// values are skipped.
Summary summarize(const std::vector<double>& values);

}  // namespace mlr
