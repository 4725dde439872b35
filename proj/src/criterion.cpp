#include "mlr/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace mlr {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::ridge: return "RIDGE";
    case Family::sparse: return "SPARSE";
    case Family::aggregated: return "AGGREGATED";
  }
  return "?";
}

Family family_from_string(std::string_view s) {
  if (s == "RIDGE") return Family::ridge;
  if (s == "SPARSE") return Family::sparse;
  if (s == "AGGREGATED") return Family::aggregated;
  throw std::invalid_argument("unknown estimator family: " + std::string(s));
}

CriterionContext::CriterionContext(Dataset data, PermutationSet perms, Family family,
                                   CriterionOptions opts)
    : data_(std::move(data)), perms_(std::move(perms)), family_(family), opts_(opts) {
  data_.validate();
  if (perms_.size() == 0 && !opts_.fit_term_only) {
    throw std::invalid_argument("criterion: need at least one permutation");
  }
  if (perms_.size() > 0 && perms_.length() != data_.n()) {
    throw std::invalid_argument("criterion: permutation length " +
                                std::to_string(perms_.length()) + " differs from n = " +
                                std::to_string(data_.n()));
  }
  const auto t = opts_.fit_term_only ? 0 : static_cast<Index>(perms_.size());
  responses_.resize(data_.n(), t + 1);
  responses_.col(0) = data_.y;
  for (Index k = 0; k < t; ++k) {
    responses_.col(k + 1) = apply_permutation(data_.y, perms_[static_cast<std::size_t>(k)]);
  }
}

VectorXd pack(const HyperParams& hp) {
  const Index p = hp.gamma.size();
  VectorXd theta(p + 3);
  theta(0) = hp.log_lambda;
  theta(1) = hp.log_kappa;
  theta.segment(2, p) = hp.gamma;
  theta(p + 2) = hp.mu;
  return theta;
}

VectorXd pack(const CriterionGradient& g) {
  HyperParams hp;
  hp.log_lambda = g.log_lambda;
  hp.log_kappa = g.log_kappa;
  hp.gamma = g.gamma;
  hp.mu = g.mu;
  return pack(hp);
}

HyperParams unpack(const VectorXd& theta) {
  if (theta.size() < 3) throw std::invalid_argument("unpack: parameter vector too short");
  const Index p = theta.size() - 3;
  HyperParams hp;
  hp.log_lambda = theta(0);
  hp.log_kappa = theta(1);
  hp.gamma = theta.segment(2, p);
  hp.mu = theta(p + 2);
  return hp;
}

VectorXd active_mask(Family family, Index p) {
  VectorXd mask = VectorXd::Zero(p + 3);
  mask(0) = 1.0;
  if (family != Family::ridge) mask.segment(1, p + 1).setOnes();
  if (family == Family::aggregated) mask(p + 2) = 1.0;
  return mask;
}

namespace {

constexpr double kDegenerateNorm = 1e-12;

// One ridge fit of all response columns on design z.
struct Member {
  Member(MatrixXd z, double lambda, const MatrixXd& responses)
      : solver(std::move(z), lambda) {
    coef = solver.coefficients(responses);
  }
  RidgeSolver solver;
  MatrixXd coef;  // p x m
};

struct Evaluation {
  CriterionEval eval;
  MatrixXd residuals;  // n x m
  VectorXd norms;      // ||r_k||_n
  std::optional<Member> ridge_member;
  std::optional<Member> sparse_member;
  std::optional<GateVector> gates;
  MatrixXd gated_x;
  double weight = 1.0;       // S(mu)
  double weight_comp = 0.0;  // 1 - S(mu)
};

void check_params(const CriterionContext& ctx, const HyperParams& hp) {
  if (!std::isfinite(hp.log_lambda) || !std::isfinite(hp.lambda()) || !(hp.lambda() > 0.0)) {
    throw std::invalid_argument("criterion: lambda out of range");
  }
  if (ctx.family() != Family::ridge) {
    if (hp.gamma.size() != ctx.data().p()) {
      throw std::invalid_argument("criterion: gamma has length " +
                                  std::to_string(hp.gamma.size()) + ", expected " +
                                  std::to_string(ctx.data().p()));
    }
    if (!std::isfinite(hp.kappa()) || !(hp.kappa() > 0.0)) {
      throw std::invalid_argument("criterion: kappa out of range");
    }
  }
  if (ctx.family() == Family::aggregated && !std::isfinite(hp.mu)) {
    throw std::invalid_argument("criterion: mu is not finite");
  }
}

// Fit term from column 0, muddle term as the mean of the remaining columns.
// The permuted norms are summed in sorted order so the result does not
// depend on the order of the permutations.
CriterionEval combine(const VectorXd& norms) {
  CriterionEval e;
  e.fit_term = norms(0);
  const Index t = norms.size() - 1;
  if (t > 0) {
    std::vector<double> muddled(norms.data() + 1, norms.data() + norms.size());
    std::sort(muddled.begin(), muddled.end());
    double sum = 0.0;
    for (double v : muddled) sum += v;
    e.muddle_term = sum / static_cast<double>(t);
  }
  e.value = e.fit_term - e.muddle_term;
  return e;
}

VectorXd column_norms_n(const MatrixXd& r) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(r.rows()));
  return r.colwise().norm().transpose() * scale;
}

Evaluation evaluate(const CriterionContext& ctx, const HyperParams& hp) {
  check_params(ctx, hp);
  const MatrixXd& x = ctx.data().x;
  const MatrixXd& ys = ctx.responses();
  const double lambda = hp.lambda();

  Evaluation ev;
  MatrixXd fitted;
  if (ctx.family() != Family::sparse) {
    ev.ridge_member.emplace(x, lambda, ys);
    fitted = x * ev.ridge_member->coef;
  }
  if (ctx.family() != Family::ridge) {
    ev.gates = gate(hp.kappa(), hp.gamma, ctx.options().spread);
    ev.gated_x = x * ev.gates->s.asDiagonal();
    ev.sparse_member.emplace(ev.gated_x, lambda, ys);
  }
  switch (ctx.family()) {
    case Family::ridge:
      break;
    case Family::sparse:
      fitted = ev.gated_x * ev.sparse_member->coef;
      ev.weight = 0.0;
      ev.weight_comp = 1.0;
      break;
    case Family::aggregated:
      ev.weight = sigmoid(hp.mu);
      ev.weight_comp = sigmoid(-hp.mu);
      fitted = ev.weight * fitted + ev.weight_comp * (ev.gated_x * ev.sparse_member->coef);
      break;
  }
  ev.residuals = ys - fitted;
  ev.norms = column_norms_n(ev.residuals);
  if (!ev.norms.allFinite()) throw std::runtime_error("criterion: non-finite residuals");
  ev.eval = combine(ev.norms);
  return ev;
}

// d value / d gate for the sparse member, given the adjoint q of the fitted
// values (value depends on fitted F through -sum_k q_k' F_k).
//   d(q'Zb)/ds_j = (X'(q - Z w))_j b_j + (X' r)_j w_j,  w = A^-1 Z' q
// where r = y - Z b is the member's own residual.
VectorXd gate_sensitivity(const MatrixXd& x, const MatrixXd& gated_x, const Member& m,
                          const MatrixXd& responses, const MatrixXd& q, const MatrixXd& w) {
  const MatrixXd own_residual = responses - gated_x * m.coef;
  const MatrixXd a = x.transpose() * (q - gated_x * w);
  const MatrixXd b = x.transpose() * own_residual;
  return -(a.cwiseProduct(m.coef).rowwise().sum() + b.cwiseProduct(w).rowwise().sum());
}

}  // namespace

CriterionValueAndGradient mlr_value_and_gradient(const CriterionContext& ctx,
                                                 const HyperParams& hp) {
  Evaluation ev = evaluate(ctx, hp);
  const MatrixXd& x = ctx.data().x;
  const MatrixXd& ys = ctx.responses();
  const Index n = x.rows();
  const Index p = x.cols();
  const Index m = ys.cols();
  const double lambda = hp.lambda();

  CriterionGradient g;
  g.gamma = VectorXd::Zero(p);

  // Adjoint of the fitted values: q_k = c_k r_k / (||r_k|| sqrt(n)) with
  // c_0 = 1 and c_k = -1/T for the permuted copies.
  MatrixXd q(n, m);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index k = 0; k < m; ++k) {
    const double c = k == 0 ? 1.0 : -1.0 / static_cast<double>(m - 1);
    if (ev.norms(k) < kDegenerateNorm) {
      q.col(k).setZero();
      g.degenerate = true;
    } else {
      q.col(k) = ev.residuals.col(k) * (c / (ev.norms(k) * root_n * root_n));
    }
  }

  if (ev.ridge_member) {
    const Member& rm = *ev.ridge_member;
    const MatrixXd w = rm.solver.solve(x.transpose() * q);
    g.log_lambda += ev.weight * lambda * w.cwiseProduct(rm.coef).sum();
  }
  if (ev.sparse_member) {
    const Member& sm = *ev.sparse_member;
    const MatrixXd w = sm.solver.solve(ev.gated_x.transpose() * q);
    g.log_lambda += ev.weight_comp * lambda * w.cwiseProduct(sm.coef).sum();

    const VectorXd d_gate =
        ev.weight_comp * gate_sensitivity(x, ev.gated_x, sm, ys, q, w);

    // Through the sigmoid: h_j = d value / d z_j.
    const GateVector& gv = *ev.gates;
    const VectorXd h = d_gate.cwiseProduct(gv.s).cwiseProduct(gv.complement);
    g.log_kappa = h.dot(gv.logits);

    const double kappa = hp.kappa();
    const VectorXd dev = hp.gamma.array() - hp.gamma.mean();
    double spread = dev.squaredNorm();
    double spread_slope = 2.0;
    if (ctx.options().spread == GateSpread::mean_of_squares) {
      spread /= static_cast<double>(p);
      spread_slope /= static_cast<double>(p);
    }
    const double h_dot_dev = h.dot(dev);
    const VectorXd h_centered = h.array() - h.mean();
    g.gamma = kappa * (spread_slope * h_dot_dev * dev + (spread + 1e-2) * h_centered);
  }
  if (ctx.family() == Family::aggregated) {
    const MatrixXd gap = x * ev.ridge_member->coef - ev.gated_x * ev.sparse_member->coef;
    g.mu = -ev.weight * ev.weight_comp * q.cwiseProduct(gap).sum();
  }
  return {ev.eval, std::move(g)};
}

CriterionEval mlr_value(const CriterionContext& ctx, const HyperParams& hp) {
  return evaluate(ctx, hp).eval;
}

CriterionGradient mlr_gradient(const CriterionContext& ctx, const HyperParams& hp) {
  return mlr_value_and_gradient(ctx, hp).gradient;
}

CriterionGradient finite_difference_gradient(const CriterionContext& ctx,
                                             const HyperParams& hp, double step) {
  HyperParams base = hp;
  if (base.gamma.size() != ctx.data().p()) base.gamma = VectorXd::Zero(ctx.data().p());
  const VectorXd theta = pack(base);
  const VectorXd mask = active_mask(ctx.family(), ctx.data().p());
  VectorXd grad = VectorXd::Zero(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    if (mask(i) == 0.0) continue;
    VectorXd up = theta, down = theta;
    up(i) += step;
    down(i) -= step;
    grad(i) = (mlr_value(ctx, unpack(up)).value - mlr_value(ctx, unpack(down)).value) /
              (2.0 * step);
  }
  const HyperParams gh = unpack(grad);
  CriterionGradient g;
  g.log_lambda = gh.log_lambda;
  g.log_kappa = gh.log_kappa;
  g.gamma = gh.gamma;
  g.mu = gh.mu;
  return g;
}

CriterionEval mlr_value(const Dataset& data, const PermutationSet& perms,
                        const Estimator& estimator, bool fit_term_only) {
  data.validate();
  const Index t = fit_term_only ? 0 : static_cast<Index>(perms.size());
  if (t > 0 && perms.length() != data.n()) {
    throw std::invalid_argument("criterion: permutation length differs from n");
  }
  VectorXd norms(t + 1);
  norms(0) = norm_n(data.y - predict(estimator(data.x, data.y), data.x));
  for (Index k = 0; k < t; ++k) {
    const VectorXd yk = apply_permutation(data.y, perms[static_cast<std::size_t>(k)]);
    norms(k + 1) = norm_n(yk - predict(estimator(data.x, yk), data.x));
  }
  return combine(norms);
}

GridSelection grid_select(const CriterionContext& ctx, const std::vector<HyperParams>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid_select: empty grid");
  GridSelection sel;
  sel.curve.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = mlr_value(ctx, grid[i]).value;
    sel.curve.push_back(v);
    const double best = sel.curve[sel.best_index];
    if (v < best || (v == best && grid[i].log_lambda > grid[sel.best_index].log_lambda)) {
      sel.best_index = i;
    }
  }
  sel.best = grid[sel.best_index];
  return sel;
}

}  // namespace mlr
