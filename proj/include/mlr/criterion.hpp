#pragma once

#include "mlr/core.hpp"
#include "mlr/estimators.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace mlr {

enum class Family { ridge, sparse, aggregated };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct CriterionOptions {
  GateSpread spread = GateSpread::sum_of_squares;
  // Diagnostic ablation: drop the permuted-label term entirely.
  bool fit_term_only = false;
};

/// Standardized data paired with the fixed label permutations the criterion
/// compares against.
class CriterionContext {
 public:
  CriterionContext(Dataset data, PermutationSet perms, Family family,
                   CriterionOptions opts = {});

  const Dataset& data() const { return data_; }
  const PermutationSet& perms() const { return perms_; }
  Family family() const { return family_; }
  const CriterionOptions& options() const { return opts_; }

  /// n x (T + 1): column 0 is Y, column t is pi^t(Y).
  const MatrixXd& responses() const { return responses_; }

 private:
  Dataset data_;
  PermutationSet perms_;
  Family family_;
  CriterionOptions opts_;
  MatrixXd responses_;
};

struct CriterionEval {
  double value = 0.0;
  double fit_term = 0.0;     // ||Y - X beta(theta, X, Y)||_n
  double muddle_term = 0.0;  // mean_t ||pi^t(Y) - X beta(theta, X, pi^t(Y))||_n
};

/// Gradient with respect to the unconstrained parametrization.
struct CriterionGradient {
  double log_lambda = 0.0;
  double log_kappa = 0.0;
  VectorXd gamma;
  double mu = 0.0;
  // Set when some residual norm vanished and its term contributed zero.
  bool degenerate = false;
};

/// Parameter vector layout used by the optimizer:
/// [log_lambda, log_kappa, gamma_0..gamma_{p-1}, mu].
VectorXd pack(const HyperParams& hp);
VectorXd pack(const CriterionGradient& g);
HyperParams unpack(const VectorXd& theta);

/// Mask over the packed layout: 1 where the family depends on the entry.
VectorXd active_mask(Family family, Index p);

CriterionEval mlr_value(const CriterionContext& ctx, const HyperParams& hp);

CriterionGradient mlr_gradient(const CriterionContext& ctx, const HyperParams& hp);

struct CriterionValueAndGradient {
  CriterionEval eval;
  CriterionGradient gradient;
};

CriterionValueAndGradient mlr_value_and_gradient(const CriterionContext& ctx,
                                                 const HyperParams& hp);

/// Central differences on the active coordinates. Debug oracle only.
CriterionGradient finite_difference_gradient(const CriterionContext& ctx,
                                             const HyperParams& hp, double step = 1e-5);

/// Any fitting rule mapping (X, y) to coefficients.
using Estimator = std::function<VectorXd(const MatrixXd& x, const VectorXd& y)>;

/// Criterion for an arbitrary estimator, e.g. a LASSO at fixed lambda.
CriterionEval mlr_value(const Dataset& data, const PermutationSet& perms,
                        const Estimator& estimator, bool fit_term_only = false);

struct GridSelection {
  std::size_t best_index = 0;
  HyperParams best;
  std::vector<double> curve;
};

/// Exhaustive argmin of the criterion over `grid`. Exact ties go to the
/// larger lambda.
GridSelection grid_select(const CriterionContext& ctx, const std::vector<HyperParams>& grid);

}  // namespace mlr
