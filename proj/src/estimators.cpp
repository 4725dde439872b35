#include "mlr/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace mlr {

double HyperParams::lambda() const { return std::exp(log_lambda); }
double HyperParams::kappa() const { return std::exp(log_kappa); }

HyperParams HyperParams::initial(Index p) {
  HyperParams hp;
  hp.log_lambda = std::log(1e3);
  hp.log_kappa = std::log(0.1);
  hp.gamma = VectorXd::Zero(p);
  hp.mu = 0.0;
  return hp;
}

HyperParams HyperParams::ridge_only(double lambda, Index p) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("hyperparams: lambda must be positive and finite");
  }
  HyperParams hp = initial(p);
  hp.log_lambda = std::log(lambda);
  return hp;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("ridge: lambda must be positive and finite, got " +
                                std::to_string(lambda));
  }
}

}  // namespace

RidgeSolver::RidgeSolver(MatrixXd z, double lambda)
    : z_(std::move(z)), lambda_(lambda), dual_(z_.cols() > z_.rows()) {
  check_lambda(lambda);
  if (!z_.allFinite()) throw std::invalid_argument("ridge: design has non-finite entries");
  MatrixXd a;
  if (dual_) {
    a = z_ * z_.transpose();
  } else {
    a = z_.transpose() * z_;
  }
  a.diagonal().array() += lambda;
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("ridge: factorization failed (lambda=" +
                             std::to_string(lambda) + ")");
  }
}

MatrixXd RidgeSolver::coefficients(const MatrixXd& responses) const {
  if (responses.rows() != z_.rows()) {
    throw std::invalid_argument("ridge: response length differs from design rows");
  }
  if (dual_) return z_.transpose() * llt_.solve(responses);
  return llt_.solve(z_.transpose() * responses);
}

MatrixXd RidgeSolver::solve(const MatrixXd& v) const {
  if (v.rows() != z_.cols()) throw std::invalid_argument("ridge: solve size mismatch");
  if (!dual_) return llt_.solve(v);
  // Woodbury: (Z'Z + l I)^-1 = (I - Z'(ZZ' + l I)^-1 Z) / l
  return (v - z_.transpose() * llt_.solve(z_ * v)) / lambda_;
}

VectorXd ridge(double lambda, const MatrixXd& x, const VectorXd& y) {
  if (!y.allFinite()) throw std::invalid_argument("ridge: response has non-finite entries");
  RidgeSolver solver(x, lambda);
  return solver.coefficients(y);
}

GateVector gate(double kappa, const VectorXd& gamma, GateSpread spread) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::invalid_argument("gate: kappa must be positive and finite");
  }
  if (gamma.size() < 1) throw std::invalid_argument("gate: empty gamma");
  if (!gamma.allFinite()) throw std::invalid_argument("gate: gamma has non-finite entries");

  const VectorXd dev = gamma.array() - gamma.mean();
  double var = dev.squaredNorm();
  if (spread == GateSpread::mean_of_squares) var /= static_cast<double>(gamma.size());

  GateVector g;
  g.logits = kappa * (var + 1e-2) * dev;
  g.s.resize(gamma.size());
  g.complement.resize(gamma.size());
  for (Index j = 0; j < gamma.size(); ++j) {
    g.s(j) = sigmoid(g.logits(j));
    g.complement(j) = sigmoid(-g.logits(j));
  }
  return g;
}

VectorXd sparse_estimator(double lambda, double kappa, const VectorXd& gamma,
                          const MatrixXd& x, const VectorXd& y, GateSpread spread) {
  if (gamma.size() != x.cols()) {
    throw std::invalid_argument("sparse_estimator: gamma length differs from column count");
  }
  const GateVector g = gate(kappa, gamma, spread);
  const MatrixXd gated = x * g.s.asDiagonal();
  return g.s.cwiseProduct(ridge(lambda, gated, y));
}

VectorXd aggregated_estimator(const HyperParams& hp, const MatrixXd& x, const VectorXd& y,
                              GateSpread spread) {
  const double w = sigmoid(hp.mu);
  const VectorXd br = ridge(hp.lambda(), x, y);
  const VectorXd bs = sparse_estimator(hp.lambda(), hp.kappa(), hp.gamma, x, y, spread);
  return w * br + sigmoid(-hp.mu) * bs;
}

VectorXd predict(const VectorXd& beta, const MatrixXd& x) {
  if (beta.size() != x.cols()) {
    throw std::invalid_argument("predict: coefficient length " + std::to_string(beta.size()) +
                                " differs from column count " + std::to_string(x.cols()));
  }
  return x * beta;
}

}  // namespace mlr
