#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mlr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Design matrix and response. Rows are observations.
struct Dataset {
  MatrixXd x;
  VectorXd y;
  std::vector<std::string> feature_names;  // empty, or one label per column

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }

  /// Throws std::invalid_argument when shapes disagree, n < 2, p < 1 or any
  /// entry is non-finite.
  void validate() const;

  static Dataset make(MatrixXd x, VectorXd y,
                      std::vector<std::string> feature_names = {});
};

/// Affine map between raw units and the centered/scaled units the
/// procedures work in.
struct Standardizer {
  VectorXd x_means;
  VectorXd x_scales;  // > 0; constant columns get 1
  double y_mean = 0.0;
  double y_scale = 1.0;

  Dataset apply(const Dataset& raw) const;
  Dataset invert(const Dataset& standardized) const;

  MatrixXd apply_x(const MatrixXd& raw_x) const;

  /// Maps standardized-space coefficients to raw units:
  /// beta_j * y_scale / x_scale_j, with intercept y_mean - x_means' beta.
  std::pair<VectorXd, double> to_original(const VectorXd& beta_std) const;
};

struct StandardizeOptions {
  // When false, X columns are centered but not rescaled.
  bool scale_x = true;
};

/// Centers and scales X columns and Y using the sample standard deviation
/// (divisor n - 1).
std::pair<Dataset, Standardizer> standardize(const Dataset& d,
                                             StandardizeOptions opts = {});

using Permutation = std::vector<Index>;

/// T permutations of {0..n-1}. When `derangements` is set, none of them has a
/// fixed point.
class PermutationSet {
 public:
  PermutationSet() = default;

  /// Validates every entry is a bijection of {0..n-1} (and fixed-point free
  /// when `derangements` is true).
  PermutationSet(std::vector<Permutation> perms, bool derangements);

  const std::vector<Permutation>& perms() const { return perms_; }
  bool derangements() const { return derangements_; }
  std::size_t size() const { return perms_.size(); }
  Index length() const {
    return perms_.empty() ? 0 : static_cast<Index>(perms_.front().size());
  }
  const Permutation& operator[](std::size_t t) const { return perms_[t]; }

 private:
  std::vector<Permutation> perms_;
  bool derangements_ = false;
};

/// Draws T independent uniform permutations, or uniform derangements by
/// rejection. Deterministic in `seed`.
PermutationSet sample_permutations(Index n, std::size_t t, bool derangements,
                                   std::uint64_t seed);

bool is_permutation(const Permutation& perm);
bool has_fixed_point(const Permutation& perm);

/// out[i] = y[perm[i]]
VectorXd apply_permutation(const VectorXd& y, const Permutation& perm);

/// Root mean square, (1/n sum v_i^2)^(1/2).
double norm_n(const VectorXd& v);

}  // namespace mlr
