#include "doctest.h"

#include "mlr/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlr;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  ScenarioSpec s;
  s.scenario = Scenario::C;
  s.n_train = 40;
  s.n_test = 60;
  s.p = 12;
  s.sparsity = 3;
  cfg.scenarios = {s};
  cfg.procedures = {Procedure::R_MLR, Procedure::CV_RIDGE};
  cfg.repetitions = 3;
  cfg.seed = 77;
  cfg.settings.grid_size = 20;
  return cfg;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::string joined(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  return out;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// Equality of everything except timing.
void check_same_rows(const ExperimentReport& a, const ExperimentReport& b) {
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    CHECK(x.scenario == y.scenario);
    CHECK(x.procedure == y.procedure);
    CHECK(x.repetition == y.repetition);
    CHECK(x.r2_test == y.r2_test);
    CHECK(x.l2_error == y.l2_error);
    CHECK(x.support_accuracy == y.support_accuracy);
    CHECK(x.iterations == y.iterations);
    CHECK(x.aggregation_weight == y.aggregation_weight);
    CHECK(x.selected_lambda == y.selected_lambda);
  }
}

}  // namespace

TEST_CASE("procedure names round-trip") {
  for (auto p : all_procedures()) CHECK(procedure_from_string(to_string(p)) == p);
  CHECK(all_procedures().size() == 8);
  CHECK_THROWS_AS(procedure_from_string("OLS"), std::invalid_argument);
}

TEST_CASE("benchmark row count, order and determinism") {
  const auto cfg = small_config();
  const auto a = run_benchmark(cfg);
  CHECK(a.rows.size() == 6);
  CHECK(a.failures() == 0);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].repetition == i / 2);
    CHECK(a.rows[i].procedure == cfg.procedures[i % 2]);
    CHECK(a.rows[i].error.empty());
    CHECK(std::isfinite(a.rows[i].r2_test));
  }
  check_same_rows(a, run_benchmark(cfg));

  auto par = cfg;
  par.workers = 4;
  check_same_rows(a, run_benchmark(par));

  // Summaries: one per (scenario, procedure, metric).
  CHECK(!a.summaries.empty());
  for (const auto& s : a.summaries) CHECK(s.stats.count == 3);
  CHECK(!a.mw_matrix.empty());
}

TEST_CASE("repetitions draw different data") {
  auto cfg = small_config();
  cfg.procedures = {Procedure::CV_RIDGE};
  const auto r = run_benchmark(cfg);
  CHECK(r.rows[0].r2_test != r.rows[1].r2_test);
}

TEST_CASE("duplicate scenario labels are disambiguated") {
  auto cfg = small_config();
  cfg.scenarios.push_back(cfg.scenarios[0]);
  cfg.scenarios[1].seed = 9;
  cfg.procedures = {Procedure::CV_RIDGE};
  cfg.repetitions = 1;
  const auto r = run_benchmark(cfg);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].scenario != r.rows[1].scenario);
}

TEST_CASE("every procedure runs") {
  auto cfg = small_config();
  cfg.procedures = all_procedures();
  cfg.repetitions = 1;
  cfg.settings.grid_size = 10;
  const auto r = run_benchmark(cfg);
  CHECK(r.rows.size() == 8);
  CHECK(r.failures() == 0);
  for (const auto& row : r.rows) {
    INFO(to_string(row.procedure));
    CHECK(row.error.empty());
    CHECK(row.aggregation_weight.has_value() == (row.procedure == Procedure::A_MLR));
    if (row.procedure == Procedure::CV_RIDGE || row.procedure == Procedure::GRID_MLR_RIDGE) {
      CHECK(row.selected_lambda.has_value());
    }
  }
}

TEST_CASE("report files follow the documented columns") {
  const auto cfg = small_config();
  const auto r = run_benchmark(cfg);
  const fs::path dir = fs::temp_directory_path() / "mlr_test_report";
  fs::remove_all(dir);
  write_report(r, dir);
  CHECK(first_line(dir / "per_repetition.csv") == joined(per_repetition_columns()));
  CHECK(first_line(dir / "summary.csv") == joined(summary_columns()));
  CHECK(line_count(dir / "per_repetition.csv") == 7);

  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.contains("config"));
  CHECK(j.at("per_repetition").size() == 6);
  CHECK(j.at("failures") == 0);
  CHECK(j.contains("summaries"));
  CHECK(j.contains("mw_matrix"));

  // Every data line has as many fields as the header.
  std::ifstream csv(dir / "per_repetition.csv");
  std::string line;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') + 1 ==
          static_cast<long>(per_repetition_columns().size()));
  }
}

TEST_CASE("curve with two grid points") {
  ScenarioSpec s;
  s.n_train = 40;
  s.n_test = 50;
  s.p = 10;
  s.sparsity = 3;
  for (auto fam : {CvFamily::ridge, CvFamily::lasso}) {
    const auto rows = run_curve(s, fam, 2, 3);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      for (double v : {r.mlr_rescaled, r.cv_rescaled, r.r2_rescaled}) CHECK((v == 0.0 || v == 1.0));
    }
    CHECK(rows[0].mlr_rescaled + rows[1].mlr_rescaled == 1.0);
  }
  CHECK_THROWS_AS(run_curve(s, CvFamily::ridge, 1, 3), std::invalid_argument);
}

TEST_CASE("curve markers point at the extremes") {
  ScenarioSpec s;
  s.n_train = 50;
  s.n_test = 100;
  s.p = 15;
  s.sparsity = 4;
  s.scenario = Scenario::B;
  for (auto fam : {CvFamily::ridge, CvFamily::lasso}) {
    const auto rows = run_curve(s, fam, 12, 5);
    REQUIRE(rows.size() == 12);
    int nm = 0, nc = 0, nr = 0;
    for (const auto& r : rows) {
      nm += r.mlr_argmin;
      nc += r.cv_argmin;
      nr += r.r2_argmax;
      for (const auto& o : rows) {
        if (r.mlr_argmin) CHECK(r.mlr <= o.mlr);
        if (r.cv_argmin) CHECK(r.cv_mse <= o.cv_mse);
        if (r.r2_argmax) CHECK(r.r2_test >= o.r2_test);
      }
    }
    CHECK(nm == 1);
    CHECK(nc == 1);
    CHECK(nr == 1);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].lambda > rows[i - 1].lambda);
  }
  const fs::path p = fs::temp_directory_path() / "mlr_test_curve.csv";
  write_curve_csv(run_curve(s, CvFamily::ridge, 3, 1), p);
  CHECK(first_line(p) == joined(curve_columns()));
}

TEST_CASE("permutation sweep shape") {
  ScenarioSpec s;
  s.n_train = 40;
  s.n_test = 50;
  s.p = 10;
  s.sparsity = 3;
  const auto one = run_permutation_sweep(s, {1}, 2, 4);
  REQUIRE(one.size() == 1);
  CHECK(one[0].permutations == 1);
  CHECK(one[0].repetitions == 2);
  CHECK(one[0].label == "T=1");

  const auto abl = run_permutation_sweep(s, {1, 5}, 2, 4, {}, Family::ridge, true, 2);
  REQUIRE(abl.size() == 3);
  CHECK(abl[2].label == "fit_term_only");
  CHECK(abl[0].r2_mean == one[0].r2_mean);

  const fs::path p = fs::temp_directory_path() / "mlr_test_sweep.csv";
  write_sweep_csv(abl, p);
  CHECK(first_line(p) == joined(sweep_columns()));
  CHECK_THROWS_AS(run_permutation_sweep(s, {}, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(run_permutation_sweep(s, {0}, 2, 4), std::invalid_argument);
}

TEST_CASE("config from JSON") {
  const auto j = nlohmann::json::parse(R"({
    "scenarios": [{"scenario": "B", "sigma": [10, 50]}, {"scenario": "A", "n_train": 60}],
    "procedures": ["R_MLR", "CV_LASSO"],
    "repetitions": 4,
    "seed": 12,
    "workers": 2,
    "permutations": 10,
    "adam": {"learning_rate": 0.25, "max_iterations": 50},
    "gate_spread": "mean",
    "freeze_kappa": true
  })");
  const auto cfg = experiment_config_from_json(j);
  REQUIRE(cfg.scenarios.size() == 3);
  CHECK(cfg.scenarios[0].scenario == Scenario::B);
  CHECK(cfg.scenarios[0].sigma == 10.0);
  CHECK(cfg.scenarios[1].sigma == 50.0);
  CHECK(cfg.scenarios[2].n_train == 60);
  CHECK(cfg.procedures == std::vector<Procedure>{Procedure::R_MLR, Procedure::CV_LASSO});
  CHECK(cfg.repetitions == 4);
  CHECK(cfg.seed == 12);
  CHECK(cfg.workers == 2);
  CHECK(cfg.settings.permutations == 10);
  CHECK(cfg.settings.adam.learning_rate == 0.25);
  CHECK(cfg.settings.adam.max_iterations == 50);
  CHECK(cfg.settings.adam.beta1 == 0.5);
  CHECK(cfg.settings.fit.criterion.spread == GateSpread::mean_of_squares);
  CHECK(cfg.settings.fit.freeze_kappa);

  // Round trip through to_json.
  const auto again = experiment_config_from_json(to_json(cfg));
  CHECK(again.scenarios.size() == 3);
  CHECK(again.settings.adam.learning_rate == 0.25);
  CHECK(again.procedures == cfg.procedures);

  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"repetitons": 3})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"adam": {"lr": 1}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"repetitions": 0})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"procedures": []})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json::parse(R"({"procedures": ["X"]})")),
                  std::invalid_argument);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int v) { return v == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("procedure seed mixes its input") {
  CHECK(procedure_seed(1) != procedure_seed(2));
  CHECK(procedure_seed(1) == procedure_seed(1));
}
