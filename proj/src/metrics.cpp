#include "mlr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mlr {

double r2_score(const VectorXd& y_true, const VectorXd& y_pred, bool squared) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r2_score: length mismatch");
  if (y_true.size() < 2) throw std::invalid_argument("r2_score: need at least 2 values");
  const double ss_res = (y_true - y_pred).squaredNorm();
  const double ss_tot = (y_true.array() - y_true.mean()).matrix().squaredNorm();
  if (!(ss_tot > 0.0)) throw std::invalid_argument("r2_score: y_true is constant");
  return squared ? 1.0 - ss_res / ss_tot : 1.0 - std::sqrt(ss_res) / std::sqrt(ss_tot);
}

double l2_error(const VectorXd& beta_hat, const VectorXd& beta_star) {
  if (beta_hat.size() != beta_star.size()) throw std::invalid_argument("l2_error: length mismatch");
  return (beta_hat - beta_star).norm();
}

SupportEstimate estimate_support(const VectorXd& beta_hat, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("support: tau must be > 0");
  SupportEstimate s;
  s.threshold = tau;
  for (Index j = 0; j < beta_hat.size(); ++j) {
    if (std::abs(beta_hat(j)) > tau) s.indices.push_back(j);
  }
  return s;
}

double support_accuracy(const VectorXd& beta_hat, const VectorXd& beta_star, double tau) {
  if (beta_hat.size() != beta_star.size()) {
    throw std::invalid_argument("support_accuracy: length mismatch");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("support_accuracy: tau must be > 0");
  if (beta_hat.size() == 0) throw std::invalid_argument("support_accuracy: empty vectors");
  Index correct = 0;
  for (Index j = 0; j < beta_hat.size(); ++j) {
    correct += (std::abs(beta_hat(j)) > tau) == (beta_star(j) != 0.0);
  }
  return static_cast<double>(correct) / static_cast<double>(beta_hat.size());
}

std::vector<double> rescale_curve(const std::vector<double>& values) {
  if (values.size() < 2) throw std::invalid_argument("rescale_curve: need at least 2 values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw std::invalid_argument("rescale_curve: constant sequence");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
  out[static_cast<std::size_t>(lo_it - values.begin())] = 0.0;
  out[static_cast<std::size_t>(hi_it - values.begin())] = 1.0;
  return out;
}

namespace {

// Midranks of the pooled sample, doubled so ties stay integral.
std::vector<std::int64_t> doubled_midranks(const std::vector<double>& pooled,
                                           std::vector<std::int64_t>& tie_sizes) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<std::int64_t> r2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // ranks i+1 .. j+1, doubled midrank = (i+1) + (j+1)
    const auto v = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) r2[order[k]] = v;
    tie_sizes.push_back(static_cast<std::int64_t>(j - i + 1));
    i = j + 1;
  }
  return r2;
}

// Two-sided exact p-value. `r2` holds the doubled midranks of the pooled
// sample, `m` the size of the sample whose doubled rank sum is `d_obs`. With
// doubled U = d - m(m+1), the p-value is P(|2U - m n_other| >= observed).
double exact_p_value(const std::vector<std::int64_t>& r2, std::size_t m, std::int64_t d_obs) {
  const std::size_t n = r2.size();
  const auto mm = static_cast<std::int64_t>(m);
  const auto other = static_cast<std::int64_t>(n - m);
  const std::int64_t center = mm * (mm + 1) + mm * other;
  std::vector<std::int64_t> sorted = r2;
  std::sort(sorted.rbegin(), sorted.rend());
  std::int64_t max_sum = 0;
  for (std::size_t k = 0; k < m; ++k) max_sum += sorted[k];

  // counts[k][s]: subsets of size k with doubled rank sum s.
  const auto width = static_cast<std::size_t>(max_sum + 1);
  std::vector<std::vector<double>> counts(m + 1, std::vector<double>(width, 0.0));
  counts[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t w = r2[i];
    for (std::size_t k = std::min(m, i + 1); k >= 1; --k) {
      auto& dst = counts[k];
      const auto& src = counts[k - 1];
      for (std::int64_t s = max_sum; s >= w; --s) {
        const double c = src[static_cast<std::size_t>(s - w)];
        if (c != 0.0) dst[static_cast<std::size_t>(s)] += c;
      }
    }
  }
  const std::int64_t target = std::llabs(d_obs - center);
  double hit = 0.0;
  double total = 0.0;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    const double c = counts[m][static_cast<std::size_t>(s)];
    if (c == 0.0) continue;
    total += c;
    if (std::llabs(s - center) >= target) hit += c;
  }
  return std::min(1.0, hit / total);
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 int exact_limit) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  for (double v : a) {
    if (std::isnan(v)) throw std::invalid_argument("mann_whitney_u: NaN in sample a");
  }
  for (double v : b) {
    if (std::isnan(v)) throw std::invalid_argument("mann_whitney_u: NaN in sample b");
  }
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::int64_t> ties;
  const auto r2 = doubled_midranks(pooled, ties);

  std::int64_t ra2 = 0;  // doubled rank sum of a
  for (std::size_t i = 0; i < na; ++i) ra2 += r2[i];
  const auto ina = static_cast<std::int64_t>(na);
  // doubled U_a
  const std::int64_t ua2 = ra2 - ina * (ina + 1);

  MannWhitneyResult res;
  res.u = static_cast<double>(ua2) / 2.0;
  if (ties.size() == 1) {
    res.p_value = 1.0;
    res.exact = std::min(na, nb) <= static_cast<std::size_t>(exact_limit);
    return res;
  }

  if (std::min(na, nb) <= static_cast<std::size_t>(exact_limit)) {
    res.exact = true;
    if (na <= nb) {
      res.p_value = exact_p_value(r2, na, ra2);
    } else {
      // Same statistic seen from b: |U_b - mu| = |U_a - mu|.
      std::int64_t rb2 = 0;
      for (std::size_t i = na; i < r2.size(); ++i) rb2 += r2[i];
      res.p_value = exact_p_value(r2, nb, rb2);
    }
    return res;
  }

  const double n = static_cast<double>(na + nb);
  const double mean_u = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  double tie_term = 0.0;
  for (auto t : ties) {
    const double td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                     ((n + 1.0) - tie_term / (n * (n - 1.0)));
  const double z = std::max(0.0, std::abs(res.u - mean_u) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

std::vector<bool> mw_best_set(const std::vector<std::vector<double>>& samples,
                              bool higher_is_better, double alpha) {
  std::vector<bool> best(samples.size(), true);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = 0; j < samples.size() && best[i]; ++j) {
      if (i == j || samples[i].empty() || samples[j].empty()) continue;
      const auto r = mann_whitney_u(samples[j], samples[i]);
      const double mu = static_cast<double>(samples[i].size() * samples[j].size()) / 2.0;
      const bool j_higher = r.u > mu;
      if (r.p_value < alpha && j_higher == higher_is_better && r.u != mu) best[i] = false;
    }
  }
  return best;
}

Summary summarize(const std::vector<double>& values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  Summary s;
  s.count = v.size();
  if (v.empty()) {
    s.mean = s.sd = s.min = s.q1 = s.median = s.q3 = s.max = std::nan("");
    return s;
  }
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

}  // namespace mlr
