#include "mlr/baselines.hpp"

#include "mlr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace mlr {

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

void check_cd_inputs(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& y) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("coordinate descent: lambda must be finite and >= 0");
  }
  if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) {
    throw std::invalid_argument("coordinate descent: l1_ratio must be in [0,1]");
  }
  if (x.rows() != y.size()) throw std::invalid_argument("coordinate descent: shape mismatch");
}

double kkt_from_residual(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& r,
                         const VectorXd& beta) {
  const double n = static_cast<double>(x.rows());
  const VectorXd corr = x.transpose() * r / n;
  const double l1 = lambda * l1_ratio;
  const double l2 = lambda * (1.0 - l1_ratio);
  double worst = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double g = -corr(j) + l2 * beta(j);
    double viol;
    if (beta(j) != 0.0) {
      viol = std::abs(g + l1 * (beta(j) > 0.0 ? 1.0 : -1.0));
    } else {
      viol = std::max(0.0, std::abs(g) - l1);
    }
    worst = std::max(worst, viol);
  }
  return worst;
}

}  // namespace

double kkt_residual(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& y,
                    const VectorXd& beta) {
  check_cd_inputs(lambda, l1_ratio, x, y);
  return kkt_from_residual(lambda, l1_ratio, x, y - x * beta, beta);
}

CdResult elastic_net_cd(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& y,
                        double tol, int max_iter, const std::optional<VectorXd>& warm_start) {
  check_cd_inputs(lambda, l1_ratio, x, y);
  if (max_iter < 1) throw std::invalid_argument("coordinate descent: max_iter must be >= 1");
  const Index p = x.cols();
  const double n = static_cast<double>(x.rows());
  const double l1 = lambda * l1_ratio;
  const double l2 = lambda * (1.0 - l1_ratio);

  CdResult res;
  res.beta = warm_start.value_or(VectorXd::Zero(p));
  if (res.beta.size() != p) throw std::invalid_argument("coordinate descent: bad warm start");
  const VectorXd col_sq = x.colwise().squaredNorm().transpose() / n;
  VectorXd r = y - x * res.beta;

  auto update = [&](Index j) {
    if (col_sq(j) == 0.0) {
      res.beta(j) = 0.0;
      return;
    }
    const double rho = x.col(j).dot(r) / n + col_sq(j) * res.beta(j);
    const double updated = soft_threshold(rho, l1) / (col_sq(j) + l2);
    const double delta = updated - res.beta(j);
    if (delta != 0.0) {
      r.noalias() -= delta * x.col(j);
      res.beta(j) = updated;
    }
  };

  // Alternate a full sweep with sweeps over the non-zero coordinates only,
  // until the full KKT check passes.
  std::vector<Index> active;
  int it = 0;
  while (it < max_iter) {
    for (Index j = 0; j < p; ++j) update(j);
    ++it;
    res.kkt_residual = kkt_from_residual(lambda, l1_ratio, x, r, res.beta);
    if (res.kkt_residual <= tol) {
      res.converged = true;
      break;
    }
    active.clear();
    for (Index j = 0; j < p; ++j) {
      if (res.beta(j) != 0.0) active.push_back(j);
    }
    while (it < max_iter && !active.empty()) {
      double max_change = 0.0;
      for (Index j : active) {
        const double before = res.beta(j);
        update(j);
        max_change = std::max(max_change, std::abs(res.beta(j) - before) * std::sqrt(col_sq(j)));
      }
      ++it;
      if (max_change <= tol) break;
    }
  }
  res.iterations = it;
  return res;
}

CdResult lasso_cd(double lambda, const MatrixXd& x, const VectorXd& y, double tol, int max_iter,
                  const std::optional<VectorXd>& warm_start) {
  return elastic_net_cd(lambda, 1.0, x, y, tol, max_iter, warm_start);
}

std::string_view to_string(CvFamily f) {
  switch (f) {
    case CvFamily::ridge: return "RIDGE";
    case CvFamily::lasso: return "LASSO";
    case CvFamily::elastic_net: return "ENET";
  }
  return "?";
}

void CvConfig::validate() const {
  if (n_folds < 2) throw std::invalid_argument("cv: n_folds must be >= 2");
  if (lambda_grid.empty()) throw std::invalid_argument("cv: empty lambda grid");
  if (l1_ratio_grid.empty()) throw std::invalid_argument("cv: empty l1_ratio grid");
  if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end())) {
    throw std::invalid_argument("cv: lambda grid must be ascending");
  }
  if (!std::is_sorted(l1_ratio_grid.begin(), l1_ratio_grid.end())) {
    throw std::invalid_argument("cv: l1_ratio grid must be ascending");
  }
  for (double l : lambda_grid) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("cv: lambda must be > 0");
  }
  for (double a : l1_ratio_grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("cv: l1_ratio must be in [0,1]");
  }
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: need 0 < lo <= hi");
  if (count == 0) throw std::invalid_argument("log_grid: count must be >= 1");
  std::vector<double> g(count);
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

double lambda_max(const Dataset& standardized) {
  const VectorXd corr = standardized.x.transpose() * standardized.y;
  return corr.cwiseAbs().maxCoeff() / static_cast<double>(standardized.n());
}

std::vector<double> default_ridge_grid(std::size_t count) { return log_grid(1e-4, 1e4, count); }

std::vector<double> default_l1_grid(const Dataset& d, std::size_t count) {
  const double top = lambda_max(standardize(d).first);
  if (!(top > 0.0)) throw std::invalid_argument("default_l1_grid: response is orthogonal to X");
  return log_grid(1e-4 * top, top, count);
}

std::vector<double> default_l1_ratio_grid() { return {0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0}; }

std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  if (n < k) throw std::invalid_argument("make_folds: fewer rows than folds");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < idx.size(); ++i) folds[i % folds.size()].push_back(idx[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<Index>& rows) {
  Dataset out;
  out.x.resize(static_cast<Index>(rows.size()), d.p());
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Index>(i)) = d.x.row(rows[i]);
    out.y(static_cast<Index>(i)) = d.y(rows[i]);
  }
  out.feature_names = d.feature_names;
  return out;
}

std::vector<CvParams> build_grid(CvFamily family, const CvConfig& cfg) {
  std::vector<CvParams> grid;
  if (family == CvFamily::elastic_net) {
    for (double a : cfg.l1_ratio_grid) {
      const double scale = cfg.scale_by_l1_ratio ? 1.0 / std::max(a, 1e-3) : 1.0;
      for (double l : cfg.lambda_grid) grid.push_back({l * scale, a});
    }
  } else {
    for (double l : cfg.lambda_grid) grid.push_back({l, family == CvFamily::ridge ? 0.0 : 1.0});
  }
  return grid;
}

// Validation MSE of every grid point for one train/validation split. L1
// paths run from the largest lambda down with warm starts.
std::vector<double> fold_errors(CvFamily family, const std::vector<CvParams>& grid,
                                const Dataset& train, const Dataset& valid,
                                const CvConfig& cfg) {
  auto [st_train, st] = standardize(train);
  std::vector<double> err(grid.size());
  std::optional<VectorXd> warm;
  for (std::size_t ii = grid.size(); ii-- > 0;) {
    if (ii + 1 < grid.size() && grid[ii].l1_ratio != grid[ii + 1].l1_ratio) warm.reset();
    // Repeated grid points reuse the fit so they score identically.
    if (ii + 1 < grid.size() && grid[ii].lambda == grid[ii + 1].lambda &&
        grid[ii].l1_ratio == grid[ii + 1].l1_ratio) {
      err[ii] = err[ii + 1];
      continue;
    }
    VectorXd b = fit_baseline(family, grid[ii], st_train, cfg, warm);
    if (family != CvFamily::ridge) warm = b;
    auto [beta, intercept] = st.to_original(b);
    const VectorXd resid = (valid.y - valid.x * beta).array() - intercept;
    err[ii] = resid.squaredNorm() / static_cast<double>(valid.n());
  }
  return err;
}

}  // namespace

VectorXd fit_baseline(CvFamily family, const CvParams& params, const Dataset& standardized,
                      const CvConfig& cfg, const std::optional<VectorXd>& warm_start) {
  switch (family) {
    case CvFamily::ridge:
      return ridge(params.lambda, standardized.x, standardized.y);
    case CvFamily::lasso:
      return lasso_cd(params.lambda, standardized.x, standardized.y, cfg.cd_tolerance,
                      cfg.cd_max_iter, warm_start)
          .beta;
    case CvFamily::elastic_net:
      return elastic_net_cd(params.lambda, params.l1_ratio, standardized.x, standardized.y,
                            cfg.cd_tolerance, cfg.cd_max_iter, warm_start)
          .beta;
  }
  throw std::invalid_argument("unknown CV family");
}

CvResult cv_grid_search(CvFamily family, const Dataset& d, const CvConfig& cfg) {
  cfg.validate();
  d.validate();
  if (d.n() < cfg.n_folds) {
    throw std::invalid_argument("cv: n = " + std::to_string(d.n()) + " is below n_folds = " +
                                std::to_string(cfg.n_folds));
  }
  const auto folds = make_folds(d.n(), cfg.n_folds, cfg.seed);
  for (const auto& f : folds) {
    if (f.size() < 2) throw std::invalid_argument("cv: validation fold with fewer than 2 rows");
    if (d.n() - static_cast<Index>(f.size()) < 2) {
      throw std::invalid_argument("cv: training part with fewer than 2 rows");
    }
  }

  CvResult res;
  res.grid = build_grid(family, cfg);
  res.cv_curve.assign(res.grid.size(), 0.0);
  for (const auto& f : folds) {
    std::vector<Index> train_rows;
    train_rows.reserve(static_cast<std::size_t>(d.n()));
    for (Index i = 0, k = 0; i < d.n(); ++i) {
      if (k < static_cast<Index>(f.size()) && f[static_cast<std::size_t>(k)] == i) {
        ++k;
        continue;
      }
      train_rows.push_back(i);
    }
    const auto err = fold_errors(family, res.grid, take_rows(d, train_rows), take_rows(d, f), cfg);
    for (std::size_t i = 0; i < err.size(); ++i) res.cv_curve[i] += err[i];
  }
  for (double& v : res.cv_curve) v /= static_cast<double>(folds.size());

  for (std::size_t i = 1; i < res.grid.size(); ++i) {
    const double v = res.cv_curve[i];
    const double best = res.cv_curve[res.best_index];
    // Exact ties go to the larger lambda (stronger regularization).
    if (v < best || (v == best && res.grid[i].lambda > res.grid[res.best_index].lambda)) {
      res.best_index = i;
    }
  }
  res.best = res.grid[res.best_index];

  auto [st_data, st] = standardize(d);
  std::tie(res.beta, res.intercept) = st.to_original(fit_baseline(family, res.best, st_data, cfg));
  return res;
}

}  // namespace mlr
