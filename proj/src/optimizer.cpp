#include "mlr/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace mlr {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must be in [0,1)");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("adam: epsilon must be >= 0");
  if (!(tolerance > 0.0)) throw std::invalid_argument("adam: tolerance must be > 0");
  if (max_iterations < 1) throw std::invalid_argument("adam: max_iterations must be >= 1");
  if (!(value_floor > 0.0)) throw std::invalid_argument("adam: value_floor must be > 0");
}

namespace {

void check_finite(double value, const VectorXd& grad, int iteration) {
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw std::runtime_error("adam: non-finite objective or gradient at iteration " +
                             std::to_string(iteration) + " (value=" + std::to_string(value) +
                             ")");
  }
}

}  // namespace

AdamResult adam_minimize(const Objective& objective, VectorXd x0, const AdamConfig& cfg) {
  cfg.validate();
  AdamResult res;
  res.x = std::move(x0);
  VectorXd grad = VectorXd::Zero(res.x.size());
  double value = objective(res.x, grad);
  check_finite(value, grad, 0);
  res.initial_value = value;

  VectorXd m = VectorXd::Zero(res.x.size());
  VectorXd v = VectorXd::Zero(res.x.size());
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    beta1_pow *= cfg.beta1;
    beta2_pow *= cfg.beta2;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const VectorXd m_hat = m / (1.0 - beta1_pow);
    const VectorXd v_hat = v / (1.0 - beta2_pow);
    res.x.array() -= cfg.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon);

    const double previous = value;
    value = objective(res.x, grad);
    check_finite(value, grad, k);
    res.trace.push_back(value);
    res.iterations = k;
    if (std::abs(value - previous) / std::max(std::abs(previous), cfg.value_floor) <
        cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

VectorXd FitResult::predict(const MatrixXd& raw_x) const {
  return (mlr::predict(beta, raw_x).array() + intercept).matrix();
}

VectorXd family_coefficients(Family family, const HyperParams& hp, const MatrixXd& x,
                             const VectorXd& y, GateSpread spread) {
  switch (family) {
    case Family::ridge: return ridge(hp.lambda(), x, y);
    case Family::sparse: return sparse_estimator(hp.lambda(), hp.kappa(), hp.gamma, x, y, spread);
    case Family::aggregated: return aggregated_estimator(hp, x, y, spread);
  }
  throw std::invalid_argument("unknown family");
}

FitResult fit_mlr(Family family, const Dataset& d, const AdamConfig& cfg, std::size_t t,
                  std::uint64_t seed, const FitOptions& opts) {
  cfg.validate();
  auto [data, st] = standardize(d, opts.standardize);
  const Index p = data.p();

  PermutationSet perms;
  if (!opts.criterion.fit_term_only) {
    perms = sample_permutations(data.n(), t, opts.derangements, seed);
  }
  const CriterionContext ctx(data, std::move(perms), family, opts.criterion);

  HyperParams start = opts.initial.value_or(HyperParams::initial(p));
  if (start.gamma.size() != p) {
    throw std::invalid_argument("fit: initial gamma has length " +
                                std::to_string(start.gamma.size()) + ", expected " +
                                std::to_string(p));
  }
  if (opts.frozen_mu) start.mu = *opts.frozen_mu;

  VectorXd mask = active_mask(family, p);
  if (opts.freeze_kappa) mask(1) = 0.0;
  if (opts.frozen_mu) mask(p + 2) = 0.0;

  const Objective objective = [&](const VectorXd& theta, VectorXd& grad) {
    auto [eval, g] = mlr_value_and_gradient(ctx, unpack(theta));
    grad = pack(g).cwiseProduct(mask);
    return eval.value;
  };
  const AdamResult opt = adam_minimize(objective, pack(start), cfg);

  FitResult fr;
  fr.family = family;
  fr.theta = unpack(opt.x);
  fr.iterations = opt.iterations;
  fr.initial_criterion = opt.initial_value;
  fr.criterion_trace = opt.trace;
  fr.converged = opt.converged;
  fr.beta_standardized =
      family_coefficients(family, fr.theta, data.x, data.y, opts.criterion.spread);
  std::tie(fr.beta, fr.intercept) = st.to_original(fr.beta_standardized);
  fr.standardizer = st;
  if (family != Family::ridge) {
    fr.gate_values = gate(fr.theta.kappa(), fr.theta.gamma, opts.criterion.spread);
  }
  if (family == Family::aggregated) fr.aggregation_weight = sigmoid(fr.theta.mu);
  return fr;
}

FitResult fit_r_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts) {
  return fit_mlr(Family::ridge, d, cfg, t, seed, opts);
}

FitResult fit_s_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts) {
  return fit_mlr(Family::sparse, d, cfg, t, seed, opts);
}

FitResult fit_a_mlr(const Dataset& d, const AdamConfig& cfg, std::size_t t,
                    std::uint64_t seed, const FitOptions& opts) {
  return fit_mlr(Family::aggregated, d, cfg, t, seed, opts);
}

}  // namespace mlr
