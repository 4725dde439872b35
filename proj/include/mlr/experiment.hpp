#pragma once

#include "mlr/baselines.hpp"
#include "mlr/core.hpp"
#include "mlr/datagen.hpp"
#include "mlr/metrics.hpp"
#include "mlr/optimizer.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlr {

enum class Procedure {
  R_MLR,
  S_MLR,
  A_MLR,
  CV_RIDGE,
  CV_LASSO,
  CV_ENET,
  GRID_MLR_RIDGE,
  GRID_MLR_LASSO,
};

std::string_view to_string(Procedure p);
Procedure procedure_from_string(std::string_view s);
const std::vector<Procedure>& all_procedures();

/// Knobs shared by every procedure of a run.
struct ProcedureSettings {
  AdamConfig adam;
  std::size_t permutations = 30;  // T
  FitOptions fit;
  int cv_folds = 5;
  std::size_t grid_size = 100;
  double support_tau = 1e-3;
};

struct ProcedureFit {
  VectorXd beta;  // raw units
  double intercept = 0.0;
  int iterations = 0;  // ADAM iterations, 0 for non-iterative procedures
  bool converged = true;
  std::optional<double> aggregation_weight;
  std::optional<double> selected_lambda;
};

/// Fits one procedure on raw training data. `seed` drives the label
/// permutations and the CV folds.
ProcedureFit run_procedure(Procedure proc, const Dataset& train, const ProcedureSettings& settings,
                           std::uint64_t seed);

struct ExperimentConfig {
  std::vector<ScenarioSpec> scenarios;
  std::vector<Procedure> procedures;
  std::size_t repetitions = 20;
  ProcedureSettings settings;
  std::uint64_t seed = 0;
  std::string output_dir = "mlr_out";
  int workers = 1;

  void validate() const;
};

/// Throws std::invalid_argument on unknown keys or bad values.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& cfg);
ScenarioSpec scenario_from_json(const nlohmann::json& j, ScenarioSpec base = {});
nlohmann::json to_json(const ScenarioSpec& spec);

struct RepetitionRow {
  std::string scenario;  // ScenarioSpec::label(), de-duplicated
  Procedure procedure = Procedure::R_MLR;
  std::size_t repetition = 0;
  double r2_test = 0.0;
  double l2_error = 0.0;
  double support_accuracy = 0.0;
  int iterations = 0;
  bool converged = true;
  double wall_seconds = 0.0;
  std::optional<double> aggregation_weight;
  std::optional<double> selected_lambda;
  std::string error;  // non-empty when the cell failed; metrics are then NaN
};

struct SummaryRow {
  std::string scenario;
  Procedure procedure = Procedure::R_MLR;
  std::string metric;
  Summary stats;
  bool mw_best = false;  // not beaten by any other procedure at p < 0.05
};

struct MwEntry {
  std::string scenario;
  std::string metric;
  Procedure a = Procedure::R_MLR;
  Procedure b = Procedure::R_MLR;
  double u = 0.0;
  double p_value = 1.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RepetitionRow> rows;  // (scenario, repetition, procedure) order
  std::vector<SummaryRow> summaries;
  std::vector<MwEntry> mw_matrix;

  std::size_t failures() const;
};

/// Repetition r of every scenario draws its data from seed ^ spec.seed ^ r;
/// all procedures in that cell share the permutation/fold seed derived from
/// it. Failures are recorded per cell and the run continues. Output does not
/// depend on `workers`.
ExperimentReport run_benchmark(const ExperimentConfig& cfg);

/// Seed used for permutations and folds in a cell whose data seed is
/// `data_seed`.
std::uint64_t procedure_seed(std::uint64_t data_seed);

struct CurveRow {
  std::size_t index = 0;
  double lambda = 0.0;
  double mlr = 0.0;
  double cv_mse = 0.0;
  double r2_test = 0.0;
  double mlr_rescaled = 0.0;
  double cv_rescaled = 0.0;
  double r2_rescaled = 0.0;
  bool mlr_argmin = false;
  bool cv_argmin = false;
  bool r2_argmax = false;
};

/// MLR criterion, CV error and test R^2 along a lambda grid for the ridge
/// (cv_family = ridge) or LASSO family.
std::vector<CurveRow> run_curve(const ScenarioSpec& spec, CvFamily family, std::size_t grid_size,
                                std::uint64_t seed, const ProcedureSettings& settings = {});

struct SweepRow {
  std::string label;  // "T=10" or "fit_term_only"
  std::size_t permutations = 0;
  std::size_t repetitions = 0;
  double r2_mean = 0.0;
  double r2_sd = 0.0;
  double iterations_mean = 0.0;
  double iterations_sd = 0.0;
};

/// Test R^2 and iteration counts of the `family` MLR fit per T. With
/// `ablation` an extra row fits the criterion without its permuted-label
/// term.
std::vector<SweepRow> run_permutation_sweep(const ScenarioSpec& spec,
                                            const std::vector<std::size_t>& t_values,
                                            std::size_t repetitions, std::uint64_t seed,
                                            const ProcedureSettings& settings = {},
                                            Family family = Family::ridge, bool ablation = false,
                                            int workers = 1);

/// Runs body(0..count-1) on up to `workers` threads. The first exception is
/// rethrown after all threads finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

nlohmann::json to_json(const ExperimentReport& report);

void write_per_repetition_csv(const ExperimentReport& report, const std::filesystem::path& path);
void write_summary_csv(const ExperimentReport& report, const std::filesystem::path& path);
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);
void write_curve_csv(const std::vector<CurveRow>& rows, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// Column lists of the CSV outputs, in order.
const std::vector<std::string>& per_repetition_columns();
const std::vector<std::string>& summary_columns();
const std::vector<std::string>& curve_columns();
const std::vector<std::string>& sweep_columns();

}  // namespace mlr
