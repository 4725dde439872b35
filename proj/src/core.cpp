#include "mlr/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mlr {

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    throw std::invalid_argument("dataset: X has " + std::to_string(x.rows()) +
                                " rows but Y has " + std::to_string(y.size()) +
                                " entries");
  }
  if (n() < 2) throw std::invalid_argument("dataset: need at least 2 rows");
  if (p() < 1) throw std::invalid_argument("dataset: need at least 1 column");
  if (!x.allFinite()) throw std::invalid_argument("dataset: X has non-finite entries");
  if (!y.allFinite()) throw std::invalid_argument("dataset: Y has non-finite entries");
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != p()) {
    throw std::invalid_argument("dataset: feature_names length differs from column count");
  }
}

Dataset Dataset::make(MatrixXd x, VectorXd y, std::vector<std::string> feature_names) {
  Dataset d{std::move(x), std::move(y), std::move(feature_names)};
  d.validate();
  return d;
}

MatrixXd Standardizer::apply_x(const MatrixXd& raw_x) const {
  if (raw_x.cols() != x_means.size()) {
    throw std::invalid_argument("standardizer: column count mismatch");
  }
  return (raw_x.rowwise() - x_means.transpose()).array().rowwise() /
         x_scales.transpose().array();
}

Dataset Standardizer::apply(const Dataset& raw) const {
  Dataset out;
  out.x = apply_x(raw.x);
  out.y = (raw.y.array() - y_mean) / y_scale;
  out.feature_names = raw.feature_names;
  return out;
}

Dataset Standardizer::invert(const Dataset& standardized) const {
  Dataset out;
  out.x = (standardized.x.array().rowwise() * x_scales.transpose().array()).matrix();
  out.x.rowwise() += x_means.transpose();
  out.y = standardized.y.array() * y_scale + y_mean;
  out.feature_names = standardized.feature_names;
  return out;
}

std::pair<VectorXd, double> Standardizer::to_original(const VectorXd& beta_std) const {
  if (beta_std.size() != x_scales.size()) {
    throw std::invalid_argument("standardizer: coefficient length mismatch");
  }
  VectorXd beta = beta_std.array() * y_scale / x_scales.array();
  double intercept = y_mean - x_means.dot(beta);
  return {std::move(beta), intercept};
}

namespace {

// Sample standard deviation; returns 1 for (numerically) constant input.
double sample_scale(const VectorXd& centered, double mean) {
  const auto n = static_cast<double>(centered.size());
  double sd = std::sqrt(centered.squaredNorm() / (n - 1.0));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return 1.0;
  return sd;
}

}  // namespace

std::pair<Dataset, Standardizer> standardize(const Dataset& d, StandardizeOptions opts) {
  d.validate();
  Standardizer st;
  st.x_means = d.x.colwise().mean().transpose();
  st.x_scales = VectorXd::Ones(d.p());
  if (opts.scale_x) {
    for (Index j = 0; j < d.p(); ++j) {
      VectorXd c = d.x.col(j).array() - st.x_means(j);
      st.x_scales(j) = sample_scale(c, st.x_means(j));
    }
  }
  st.y_mean = d.y.mean();
  VectorXd yc = d.y.array() - st.y_mean;
  st.y_scale = sample_scale(yc, st.y_mean);
  return {st.apply(d), st};
}

bool is_permutation(const Permutation& perm) {
  std::vector<bool> seen(perm.size(), false);
  for (Index v : perm) {
    if (v < 0 || static_cast<std::size_t>(v) >= perm.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

bool has_fixed_point(const Permutation& perm) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] == static_cast<Index>(i)) return true;
  }
  return false;
}

PermutationSet::PermutationSet(std::vector<Permutation> perms, bool derangements)
    : perms_(std::move(perms)), derangements_(derangements) {
  if (perms_.empty()) throw std::invalid_argument("permutation set: T must be >= 1");
  const auto n = perms_.front().size();
  for (const auto& p : perms_) {
    if (p.size() != n) throw std::invalid_argument("permutation set: lengths differ");
    if (!is_permutation(p)) throw std::invalid_argument("permutation set: not a bijection");
    if (derangements_ && has_fixed_point(p)) {
      throw std::invalid_argument("permutation set: derangement has a fixed point");
    }
  }
}

PermutationSet sample_permutations(Index n, std::size_t t, bool derangements,
                                   std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_permutations: n must be >= 2");
  if (t < 1) throw std::invalid_argument("sample_permutations: T must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Permutation> perms;
  perms.reserve(t);
  Permutation p(static_cast<std::size_t>(n));
  while (perms.size() < t) {
    std::iota(p.begin(), p.end(), Index{0});
    std::shuffle(p.begin(), p.end(), rng);
    if (derangements && has_fixed_point(p)) continue;
    perms.push_back(p);
  }
  return PermutationSet(std::move(perms), derangements);
}

VectorXd apply_permutation(const VectorXd& y, const Permutation& perm) {
  if (static_cast<Index>(perm.size()) != y.size()) {
    throw std::invalid_argument("apply_permutation: length mismatch");
  }
  VectorXd out(y.size());
  for (Index i = 0; i < y.size(); ++i) out(i) = y(perm[i]);
  return out;
}

double norm_n(const VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("norm_n: empty vector");
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

}  // namespace mlr
