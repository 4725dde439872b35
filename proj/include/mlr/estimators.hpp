#pragma once

#include "mlr/core.hpp"

#include <Eigen/Cholesky>

namespace mlr {

/// Regularization parameters. lambda and kappa are stored on the log scale
/// so unconstrained gradient steps keep them positive.
struct HyperParams {
  double log_lambda = 0.0;
  double log_kappa = 0.0;
  VectorXd gamma;
  double mu = 0.0;

  double lambda() const;
  double kappa() const;

  /// lambda = 1e3, kappa = 0.1, gamma = 0_p, mu = 0.
  static HyperParams initial(Index p);
  static HyperParams ridge_only(double lambda, Index p = 0);
};

/// How the spread of gamma enters the gate sharpness.
enum class GateSpread {
  sum_of_squares,   // sum_i (gamma_i - mean)^2
  mean_of_squares,  // (1/p) sum_i (gamma_i - mean)^2, sensitivity variant
};

/// Diagonal of the quasi-sparsifying gate. `complement` holds 1 - s computed
/// without cancellation; in double precision saturated entries of `s` round
/// to exactly 0 or 1 while the complement stays accurate.
struct GateVector {
  VectorXd s;
  VectorXd complement;
  VectorXd logits;  // z_j = kappa (spread + 1e-2) (gamma_j - mean)
};

double sigmoid(double z);

/// Solves (Z'Z + lambda I) b = Z'y for many right-hand sides with one
/// factorization. Uses the p x p system when p <= n and the n x n dual
/// system Z'(ZZ' + lambda I)^-1 y otherwise.
class RidgeSolver {
 public:
  RidgeSolver(MatrixXd z, double lambda);

  /// Ridge coefficients for each column of `responses` (n x m) -> p x m.
  MatrixXd coefficients(const MatrixXd& responses) const;

  /// (Z'Z + lambda I)^-1 v for each column of v (p x m).
  MatrixXd solve(const MatrixXd& v) const;

  bool dual() const { return dual_; }
  double lambda() const { return lambda_; }

 private:
  MatrixXd z_;
  double lambda_;
  bool dual_;
  Eigen::LLT<MatrixXd> llt_;
};

/// (X'X + lambda I)^-1 X'Y.
VectorXd ridge(double lambda, const MatrixXd& x, const VectorXd& y);

GateVector gate(double kappa, const VectorXd& gamma,
                GateSpread spread = GateSpread::sum_of_squares);

/// S(kappa, gamma) ridge(lambda, X S(kappa, gamma), Y).
VectorXd sparse_estimator(double lambda, double kappa, const VectorXd& gamma,
                          const MatrixXd& x, const VectorXd& y,
                          GateSpread spread = GateSpread::sum_of_squares);

/// S(mu) ridge + (1 - S(mu)) sparse, both at the same lambda.
VectorXd aggregated_estimator(const HyperParams& hp, const MatrixXd& x,
                              const VectorXd& y,
                              GateSpread spread = GateSpread::sum_of_squares);

VectorXd predict(const VectorXd& beta, const MatrixXd& x);

}  // namespace mlr
