#pragma once

#include "mlr/core.hpp"
#include "mlr/criterion.hpp"
#include "mlr/estimators.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace mlr {

/// Defaults: tolerance 1e-4, 1000 iterations, learning rate 0.5,
/// beta1 0.5, beta2 0.9.
struct AdamConfig {
  double learning_rate = 0.5;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  double tolerance = 1e-4;
  int max_iterations = 1000;
  // Stop when |f_k - f_{k-1}| / max(|f_{k-1}|, value_floor) < tolerance.
  double value_floor = 1e-2;

  void validate() const;
};

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const VectorXd& x, VectorXd& grad)>;

struct AdamResult {
  VectorXd x;
  double initial_value = 0.0;
  std::vector<double> trace;  // objective after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Bias-corrected ADAM. Throws std::runtime_error on a non-finite value or
/// gradient.
AdamResult adam_minimize(const Objective& objective, VectorXd x0, const AdamConfig& cfg);

struct FitOptions {
  StandardizeOptions standardize;
  CriterionOptions criterion;
  bool derangements = true;
  bool freeze_kappa = false;
  // Holds mu at this value instead of training it (aggregated family only).
  std::optional<double> frozen_mu;
  // Starting point; defaults to HyperParams::initial(p).
  std::optional<HyperParams> initial;
};

struct FitResult {
  VectorXd beta;  // raw units
  double intercept = 0.0;
  VectorXd beta_standardized;
  Standardizer standardizer;
  HyperParams theta;
  Family family = Family::ridge;
  int iterations = 0;
  double initial_criterion = 0.0;
  std::vector<double> criterion_trace;
  bool converged = false;
  std::optional<GateVector> gate_values;
  std::optional<double> aggregation_weight;  // S(mu)

  VectorXd predict(const MatrixXd& raw_x) const;
};

/// Standardizes, samples T label permutations from `seed`, minimizes the
/// criterion of `family` over its parameters with ADAM and maps the final
/// coefficients back to raw units.
FitResult fit_mlr(Family family, const Dataset& d, const AdamConfig& cfg, std::size_t t,
                  std::uint64_t seed, const FitOptions& opts = {});

FitResult fit_r_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts = {});
FitResult fit_s_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts = {});
FitResult fit_a_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts = {});

/// Coefficients of `family` at `hp` on standardized data.
VectorXd family_coefficients(Family family, const HyperParams& hp, const MatrixXd& x,
                             const VectorXd& y, GateSpread spread = GateSpread::sum_of_squares);

}  // namespace mlr
