#include "doctest.h"

#include "mlr/criterion.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace mlr;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

Dataset standardized_instance(Index n, Index p, std::uint64_t seed) {
  const MatrixXd x = random_matrix(n, p, seed);
  const VectorXd beta = random_vector(p, seed + 1);
  const VectorXd y = x * beta + 0.8 * random_vector(n, seed + 2);
  return standardize(Dataset::make(x, y)).first;
}

// Coefficients of a family computed from the testutil oracles only.
VectorXd family_oracle(Family f, const HyperParams& hp, const MatrixXd& x, const VectorXd& y) {
  const VectorXd br = testutil::ridge_oracle(hp.lambda(), x, y);
  if (f == Family::ridge) return br;
  const VectorXd s = testutil::gate_oracle(hp.kappa(), hp.gamma);
  MatrixXd xs = x;
  for (Index j = 0; j < x.cols(); ++j) xs.col(j) *= s(j);
  const VectorXd bs = (testutil::ridge_oracle(hp.lambda(), xs, y).array() * s.array()).matrix();
  if (f == Family::sparse) return bs;
  const double w = testutil::sigmoid_oracle(hp.mu);
  return w * br + (1.0 - w) * bs;
}

double criterion_oracle(Family f, const HyperParams& hp, const Dataset& d,
                        const std::vector<Permutation>& perms) {
  auto resid_norm = [&](const VectorXd& yy) {
    return testutil::rms(yy - d.x * family_oracle(f, hp, d.x, yy));
  };
  double muddle = 0.0;
  for (const auto& p : perms) {
    VectorXd yp(d.n());
    for (Index i = 0; i < d.n(); ++i) yp(i) = d.y(p[static_cast<std::size_t>(i)]);
    muddle += resid_norm(yp);
  }
  return resid_norm(d.y) - muddle / static_cast<double>(perms.size());
}

HyperParams random_params(Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  HyperParams hp = HyperParams::initial(p);
  hp.log_lambda = -1.0 + 3.0 * u(rng);
  hp.log_kappa = std::log(0.05 + 0.45 * u(rng));
  for (Index j = 0; j < p; ++j) hp.gamma(j) = 0.3 * nd(rng);
  hp.mu = nd(rng);
  return hp;
}

// Central differences over the packed layout, computed here rather than with
// the library's debug helper.
VectorXd central_difference(const CriterionContext& ctx, const HyperParams& hp, double h) {
  const VectorXd theta = pack(hp);
  const VectorXd mask = active_mask(ctx.family(), ctx.data().p());
  VectorXd g = VectorXd::Zero(theta.size());
  for (Index k = 0; k < theta.size(); ++k) {
    if (mask(k) == 0.0) continue;
    VectorXd tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    g(k) = (mlr_value(ctx, unpack(tp)).value - mlr_value(ctx, unpack(tm)).value) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("family names round-trip") {
  for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
    CHECK(family_from_string(to_string(f)) == f);
  }
  CHECK_THROWS_AS(family_from_string("LASSO"), std::invalid_argument);
}

TEST_CASE("pack/unpack layout") {
  HyperParams hp = random_params(4, 3);
  const VectorXd t = pack(hp);
  REQUIRE(t.size() == 7);
  CHECK(t(0) == hp.log_lambda);
  CHECK(t(1) == hp.log_kappa);
  CHECK(t(6) == hp.mu);
  const HyperParams back = unpack(t);
  CHECK(back.gamma == hp.gamma);
  CHECK(back.mu == hp.mu);
}

TEST_CASE("criterion vanishes when every fit is the null model") {
  const Dataset d = standardized_instance(40, 6, 1);
  for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
    const CriterionContext ctx(d, sample_permutations(40, 30, true, 2), f);
    HyperParams hp = HyperParams::initial(6);
    hp.log_lambda = std::log(1e12);
    const auto e = mlr_value(ctx, hp);
    CHECK(std::abs(e.value) <= 1e-6);
    CHECK(e.fit_term == doctest::Approx(norm_n(d.y)).epsilon(1e-6));
  }
  // Estimator pinned to zero: both terms are ||Y||_n up to summation order.
  const Estimator zero = [](const MatrixXd& x, const VectorXd&) {
    return VectorXd::Zero(x.cols());
  };
  const auto e = mlr_value(d, sample_permutations(40, 30, true, 3), zero);
  CHECK(std::abs(e.value) <= 1e-12 * 40);
}

TEST_CASE("identity permutation gives exactly zero") {
  const Dataset d = standardized_instance(15, 4, 5);
  const PermutationSet id({{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}}, false);
  for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
    const CriterionContext ctx(d, id, f);
    for (std::uint64_t s = 0; s < 5; ++s) CHECK(mlr_value(ctx, random_params(4, s)).value == 0.0);
  }
}

TEST_CASE("criterion matches a compositional oracle") {
  const Dataset d = standardized_instance(20, 5, 7);
  const auto perms = sample_permutations(20, 3, true, 8);
  HyperParams hp = HyperParams::initial(5);
  hp.log_lambda = 0.0;  // lambda = 1
  const CriterionContext ridge_ctx(d, perms, Family::ridge);
  CHECK(std::abs(mlr_value(ridge_ctx, hp).value -
                 criterion_oracle(Family::ridge, hp, d, perms.perms())) <= 1e-12);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const HyperParams r = random_params(5, s);
    for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
      const CriterionContext ctx(d, perms, f);
      CHECK(std::abs(mlr_value(ctx, r).value - criterion_oracle(f, r, d, perms.perms())) <= 1e-12);
    }
  }
}

TEST_CASE("decomposition and exchangeability") {
  const Dataset d = standardized_instance(25, 6, 9);
  const auto perms = sample_permutations(25, 10, true, 10);
  auto reversed = perms.perms();
  std::reverse(reversed.begin(), reversed.end());
  std::mt19937_64 rng(1);
  auto shuffled = perms.perms();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
    const CriterionContext a(d, perms, f);
    const CriterionContext b(d, PermutationSet(reversed, true), f);
    const CriterionContext c(d, PermutationSet(shuffled, true), f);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto hp = random_params(6, s + 20);
      const auto e = mlr_value(a, hp);
      CHECK(std::abs(e.value - (e.fit_term - e.muddle_term)) <= 1e-14);
      CHECK(e.fit_term >= 0.0);
      CHECK(e.muddle_term >= 0.0);
      CHECK(mlr_value(b, hp).value == e.value);
      CHECK(mlr_value(c, hp).value == e.value);
    }
  }
}

TEST_CASE("ridge gradient only moves lambda") {
  const Dataset d = standardized_instance(20, 5, 11);
  const CriterionContext ctx(d, sample_permutations(20, 5, true, 12), Family::ridge);
  const auto g = mlr_gradient(ctx, random_params(5, 13));
  CHECK(g.log_lambda != 0.0);
  CHECK(g.log_kappa == 0.0);
  CHECK(g.mu == 0.0);
  CHECK(g.gamma.isZero());
}

TEST_CASE("analytic gradient agrees with central differences") {
  for (auto f : {Family::ridge, Family::sparse, Family::aggregated}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Dataset d = standardized_instance(20, 5, 100 + seed);
      const CriterionContext ctx(d, sample_permutations(20, 5, true, 200 + seed), f);
      const HyperParams hp = random_params(5, 300 + seed);
      const VectorXd ga = pack(mlr_gradient(ctx, hp));
      const VectorXd gf = central_difference(ctx, hp, 1e-5);
      const double rel = (ga - gf).norm() / std::max(gf.norm(), 1e-6);
      worst = std::max(worst, rel);
    }
    INFO("family " << to_string(f));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("library finite-difference helper agrees with the analytic gradient") {
  const Dataset d = standardized_instance(20, 5, 41);
  const CriterionContext ctx(d, sample_permutations(20, 4, true, 42), Family::aggregated);
  const HyperParams hp = random_params(5, 43);
  const VectorXd ga = pack(mlr_gradient(ctx, hp));
  const VectorXd gf = pack(finite_difference_gradient(ctx, hp));
  CHECK((ga - gf).norm() / gf.norm() <= 1e-4);
}

TEST_CASE("gradient is flat for huge lambda") {
  const Dataset d = standardized_instance(30, 5, 51);
  const CriterionContext ctx(d, sample_permutations(30, 10, true, 52), Family::ridge);
  const auto g = mlr_gradient(ctx, HyperParams::ridge_only(1e12, 5));
  CHECK(std::abs(g.log_lambda) <= 1e-6);
}

TEST_CASE("exact fits flag a degenerate gradient") {
  // p > n and lambda tiny: every response is interpolated.
  const Dataset d = Dataset::make(random_matrix(4, 9, 61), random_vector(4, 62));
  const CriterionContext ctx(d, sample_permutations(4, 3, true, 63), Family::ridge);
  const auto vg = mlr_value_and_gradient(ctx, HyperParams::ridge_only(1e-15, 9));
  CHECK(vg.gradient.degenerate);
  CHECK(std::isfinite(vg.gradient.log_lambda));
  const auto ok = mlr_value_and_gradient(ctx, HyperParams::ridge_only(1.0, 9));
  CHECK_FALSE(ok.gradient.degenerate);
}

TEST_CASE("context validation") {
  const Dataset d = standardized_instance(10, 3, 71);
  CHECK_THROWS_AS(CriterionContext(d, sample_permutations(9, 2, true, 1), Family::ridge),
                  std::invalid_argument);
  CHECK_THROWS_AS(CriterionContext(d, PermutationSet{}, Family::ridge), std::invalid_argument);
  CHECK_NOTHROW(CriterionContext(d, PermutationSet{}, Family::ridge, {GateSpread::sum_of_squares, true}));
  const CriterionContext ctx(d, sample_permutations(10, 2, true, 1), Family::sparse);
  HyperParams bad = HyperParams::initial(2);
  CHECK_THROWS_AS(mlr_value(ctx, bad), std::invalid_argument);
}

TEST_CASE("grid_select") {
  const Dataset d = standardized_instance(30, 5, 81);
  const CriterionContext ctx(d, sample_permutations(30, 10, true, 82), Family::ridge);
  CHECK_THROWS_AS(grid_select(ctx, {}), std::invalid_argument);

  const auto one = grid_select(ctx, {HyperParams::ridge_only(2.0, 5)});
  CHECK(one.best_index == 0);
  CHECK(one.curve.size() == 1);

  std::vector<HyperParams> grid;
  for (double l : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3}) grid.push_back(HyperParams::ridge_only(l, 5));
  const auto sel = grid_select(ctx, grid);
  std::size_t argmin = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = mlr_value(ctx, grid[i]).value;
    CHECK(sel.curve[i] == v);
    if (v < sel.curve[argmin]) argmin = i;
  }
  CHECK(sel.best_index == argmin);

  // All values tie under the identity permutation: the largest lambda wins.
  std::vector<Permutation> id(1, Permutation(30));
  std::iota(id[0].begin(), id[0].end(), Index{0});
  const CriterionContext flat(d, PermutationSet(id, false), Family::ridge);
  const auto tie = grid_select(flat, grid);
  CHECK(tie.best_index == grid.size() - 1);
}

TEST_CASE("fit-term-only ablation ignores the permutations") {
  const Dataset d = standardized_instance(20, 4, 91);
  const CriterionContext ctx(d, PermutationSet{}, Family::ridge, {GateSpread::sum_of_squares, true});
  const auto hp = HyperParams::ridge_only(0.5, 4);
  const auto e = mlr_value(ctx, hp);
  CHECK(e.muddle_term == 0.0);
  CHECK(e.value == doctest::Approx(testutil::rms(d.y - d.x * testutil::ridge_oracle(0.5, d.x, d.y))).epsilon(1e-12));
}
