#include "doctest.h"

#include "mlr/metrics.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace mlr;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// U of `a` by pairwise comparison: 1 per a > b, 1/2 per tie.
double pairwise_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// Two-sided exact p-value by enumerating every split of the pooled sample
// into groups of sizes n_a and n_b.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const double mid = static_cast<double>(a.size() * b.size()) / 2.0;
  const double obs = std::abs(pairwise_u(a, b) - mid);
  std::size_t hit = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    std::vector<double> ga, gb;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? ga : gb).push_back(pooled[i]);
    ++total;
    if (std::abs(pairwise_u(ga, gb) - mid) >= obs) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("r2_score") {
  const VectorXd y = vec({0, 1, 2, 3});
  CHECK(r2_score(y, vec({0, 1, 2, 2})) == doctest::Approx(0.8).epsilon(1e-15));
  for (bool sq : {true, false}) {
    CHECK(r2_score(y, y, sq) == 1.0);
    CHECK(r2_score(y, VectorXd::Constant(4, 1.5), sq) == doctest::Approx(0.0).scale(1.0));
  }
  // unsquared: 1 - ||e|| / ||y - mean|| = 1 - 1 / sqrt(5)
  CHECK(r2_score(y, vec({0, 1, 2, 2}), false) == doctest::Approx(1.0 - 1.0 / std::sqrt(5.0)).epsilon(1e-15));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const VectorXd a = testutil::random_vector(10, s);
    CHECK(r2_score(a, testutil::random_vector(10, s + 100)) <= 1.0);
  }
  CHECK_THROWS_AS(r2_score(VectorXd::Ones(3), vec({1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(r2_score(y, vec({1, 2})), std::invalid_argument);
}

TEST_CASE("l2_error") {
  CHECK(l2_error(vec({3, 0}), vec({0, 4})) == 5.0);
  CHECK(l2_error(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const VectorXd a = testutil::random_vector(17, s);
    const VectorXd b = testutil::random_vector(17, s + 50);
    double acc = 0.0;
    for (Index j = 0; j < 17; ++j) acc += (a(j) - b(j)) * (a(j) - b(j));
    CHECK(testutil::rel_err(l2_error(a, b), std::sqrt(acc)) <= 1e-14);
  }
  CHECK_THROWS_AS(l2_error(vec({1}), vec({1, 2})), std::invalid_argument);
}

TEST_CASE("support accuracy") {
  CHECK(support_accuracy(vec({4.9, 0.0005, 0.1, 0}), vec({5, 0, 0, 5})) == 0.5);
  CHECK(support_accuracy(vec({1, 0, -2}), vec({1, 0, -2})) == 1.0);
  CHECK(support_accuracy(VectorXd::Zero(3), vec({1, 2, 3})) == 0.0);
  const auto est = estimate_support(vec({4.9, 0.0005, 0.1, 0}));
  CHECK(est.indices == std::vector<Index>{0, 2});
  CHECK(est.threshold == 1e-3);

  // Permuting coordinates of both vectors leaves the score unchanged.
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd bh = testutil::random_vector(12, static_cast<std::uint64_t>(rep));
    VectorXd bs = testutil::random_vector(12, static_cast<std::uint64_t>(rep) + 40);
    for (Index j = 0; j < 12; j += 3) bh(j) = 1e-4;
    for (Index j = 0; j < 12; j += 2) bs(j) = 0.0;
    std::vector<Index> perm(12);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    VectorXd ph(12), ps(12);
    for (Index j = 0; j < 12; ++j) {
      ph(j) = bh(perm[static_cast<std::size_t>(j)]);
      ps(j) = bs(perm[static_cast<std::size_t>(j)]);
    }
    const double acc = support_accuracy(bh, bs);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(support_accuracy(ph, ps) == acc);
  }
  CHECK_THROWS_AS(support_accuracy(vec({1}), vec({1}), 0.0), std::invalid_argument);
}

TEST_CASE("rescale_curve") {
  CHECK(rescale_curve({2, 4, 6}) == std::vector<double>{0, 0.5, 1});
  CHECK(rescale_curve({0, 0.25, 1}) == std::vector<double>{0, 0.25, 1});
  const std::vector<double> v = {3.2, -1.0, 7.5, 0.4};
  const auto r = rescale_curve(v);
  const auto neg = rescale_curve({-3.2, 1.0, -7.5, -0.4});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(neg[i] == doctest::Approx(1.0 - r[i]).epsilon(1e-15));
  CHECK(std::min_element(r.begin(), r.end()) - r.begin() == 1);
  CHECK(std::max_element(r.begin(), r.end()) - r.begin() == 2);
  CHECK_THROWS_AS(rescale_curve({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(rescale_curve({2.0, 2.0}), std::invalid_argument);
}

TEST_CASE("Mann-Whitney: worked examples") {
  const auto r = mann_whitney_u({1, 2}, {3, 4});
  CHECK(r.u == 0.0);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<double> s = {0.3, 1.2, 0.7, 2.2, 1.9};
  CHECK(mann_whitney_u(s, s).u == 12.5);
  CHECK(mann_whitney_u({4, 4, 4}, {4, 4}).p_value == 1.0);
  CHECK_THROWS_AS(mann_whitney_u({}, {1.0}), std::invalid_argument);
}

TEST_CASE("Mann-Whitney: symmetry") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> small(0, 6);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t na = 1 + static_cast<std::size_t>(rep % 13);
    const std::size_t nb = 2 + static_cast<std::size_t>((rep * 7) % 17);
    std::vector<double> a(na), b(nb);
    const bool tied = rep % 2 == 0;
    for (auto& v : a) v = tied ? small(rng) : nd(rng);
    for (auto& v : b) v = tied ? small(rng) : nd(rng) + 0.5;
    const auto ab = mann_whitney_u(a, b);
    const auto ba = mann_whitney_u(b, a);
    CHECK(ab.u + ba.u == static_cast<double>(na * nb));
    CHECK(ab.u == pairwise_u(a, b));
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-14));
    CHECK(ab.p_value >= 0.0);
    CHECK(ab.p_value <= 1.0);
  }
}

TEST_CASE("Mann-Whitney: exact p-values equal brute-force enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::size_t checked = 0;
  for (std::size_t na = 1; na <= 8; ++na) {
    for (std::size_t nb = 1; nb <= 8; ++nb) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> a(na), b(nb);
        // rep 0: continuous, rep 1: heavy ties, rep 2: shifted continuous
        for (auto& v : a) v = rep == 1 ? coarse(rng) : nd(rng);
        for (auto& v : b) v = rep == 1 ? coarse(rng) : nd(rng) + (rep == 2 ? 1.5 : 0.0);
        const auto r = mann_whitney_u(a, b);
        REQUIRE(r.exact);
        INFO("na " << na << " nb " << nb << " rep " << rep);
        CHECK(r.p_value == brute_force_p(a, b));
        ++checked;
      }
    }
  }
  CHECK(checked == 192);
}

TEST_CASE("Mann-Whitney: normal approximation") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::vector<double> a(12), b(15);
  for (auto& v : a) v = coarse(rng);
  for (auto& v : b) v = coarse(rng) + 2;
  const auto r = mann_whitney_u(a, b);
  CHECK_FALSE(r.exact);
  // Oracle with tie-corrected variance and continuity correction.
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  double tie = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie += t * t * t - t;
    i = j;
  }
  const double n = 27.0;
  const double var = 12.0 * 15.0 / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
  const double u = pairwise_u(a, b);
  const double z = std::max(0.0, std::abs(u - 90.0) - 0.5) / std::sqrt(var);
  CHECK(r.u == u);
  CHECK(r.p_value == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-13));
}

TEST_CASE("best set by pairwise tests") {
  std::vector<std::vector<double>> samples = {
      {0.90, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99},
      {0.905, 0.915, 0.925, 0.935, 0.945, 0.955, 0.965, 0.975, 0.985, 0.995},
      {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.86},
  };
  CHECK(mw_best_set(samples, true) == std::vector<bool>{true, true, false});
  CHECK(mw_best_set(samples, false) == std::vector<bool>{false, false, true});
}

TEST_CASE("summarize") {
  const auto s = summarize({4, 1, 3, 2, 5});
  CHECK(s.count == 5);
  CHECK(s.mean == 3.0);
  CHECK(s.sd == doctest::Approx(std::sqrt(2.5)).epsilon(1e-15));
  CHECK(s.min == 1.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.median == 3.0);
  CHECK(s.q3 == 4.0);
  CHECK(s.max == 5.0);
  const auto t = summarize({1, 2, 3, 4});
  CHECK(t.median == 2.5);
  CHECK(t.q1 == 1.75);
  const auto nan_skipped = summarize({1.0, std::nan(""), 3.0});
  CHECK(nan_skipped.count == 2);
  CHECK(nan_skipped.mean == 2.0);
  const auto one = summarize({7.0});
  CHECK(one.sd == 0.0);
  CHECK(std::isnan(summarize({}).mean));
}
