#pragma once

#include "mlr/core.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace mlr {

struct CdResult {
  VectorXd beta;
  int iterations = 0;  // full sweeps
  bool converged = false;
  double kkt_residual = 0.0;
};

/// Largest violation of the optimality conditions of
///   (1/2n)||y - X b||^2 + lambda (l1_ratio ||b||_1 + (1 - l1_ratio)/2 ||b||^2).
double kkt_residual(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& y,
                    const VectorXd& beta);

/// Cyclic coordinate descent for (1/2n)||y - X b||^2 + lambda ||b||_1.
/// Stops once the KKT residual is <= tol.
CdResult lasso_cd(double lambda, const MatrixXd& x, const VectorXd& y, double tol = 1e-7,
                  int max_iter = 10000, const std::optional<VectorXd>& warm_start = {});

/// Coordinate descent for the elastic net. With l1_ratio = 0 the solution is
/// ridge(n * lambda, X, y).
CdResult elastic_net_cd(double lambda, double l1_ratio, const MatrixXd& x, const VectorXd& y,
                        double tol = 1e-7, int max_iter = 10000,
                        const std::optional<VectorXd>& warm_start = {});

enum class CvFamily { ridge, lasso, elastic_net };

std::string_view to_string(CvFamily f);

struct CvConfig {
  int n_folds = 5;
  std::vector<double> lambda_grid;                // ascending, > 0
  std::vector<double> l1_ratio_grid = {1.0};      // ascending, in [0,1]; elastic net only
  std::uint64_t seed = 0;
  // Elastic net only: use lambda / l1_ratio at each grid point, so a grid
  // built for the LASSO covers the matching range for every mixing ratio.
  bool scale_by_l1_ratio = false;
  // Looser than the standalone solver defaults: the tail of an L1 grid sits
  // near interpolation where coordinate descent converges slowly, and those
  // points only need to be accurate enough to rank validation errors.
  double cd_tolerance = 1e-5;
  int cd_max_iter = 2000;

  void validate() const;
};

/// `count` log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

/// max_j |X_j' y| / n on standardized data.
double lambda_max(const Dataset& standardized);

/// 100 points on [1e-4, 1e4].
std::vector<double> default_ridge_grid(std::size_t count = 100);

/// `count` points on [1e-4 lambda_max, lambda_max] computed from the
/// standardized version of `d`.
std::vector<double> default_l1_grid(const Dataset& d, std::size_t count = 100);

std::vector<double> default_l1_ratio_grid();

/// Shuffled partition of {0..n-1} into k folds whose sizes differ by at most 1.
std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed);

struct CvParams {
  double lambda = 0.0;
  double l1_ratio = 1.0;
};

struct CvResult {
  CvParams best;
  std::size_t best_index = 0;
  std::vector<CvParams> grid;    // order matches cv_curve
  std::vector<double> cv_curve;  // mean validation MSE per grid point
  VectorXd beta;                 // refit on the full data, raw units
  double intercept = 0.0;
};

/// Fits `family` on standardized data at given params.
VectorXd fit_baseline(CvFamily family, const CvParams& params, const Dataset& standardized,
                      const CvConfig& cfg, const std::optional<VectorXd>& warm_start = {});

/// k-fold CV mean squared prediction error per grid point, minimizer (ties go
/// to the larger lambda) and refit on all rows.
CvResult cv_grid_search(CvFamily family, const Dataset& d, const CvConfig& cfg);

}  // namespace mlr
