#pragma once

#include "mlr/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mlr {

// A: Toeplitz-correlated X, dense +-1 beta*.
// B: independent X, sparse +-10 beta*.
// C: Toeplitz-correlated X, sparse +-10 beta*.
enum class Scenario { A, B, C };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct ScenarioSpec {
  Scenario scenario = Scenario::A;
  Index n_train = 100;
  Index n_test = 1000;
  Index p = 80;
  double sigma = 10.0;
  double rho = 0.8;            // Sigma_ij = rho^|i-j| for A and C
  Index sparsity = 8;          // non-zeros of beta* for B and C
  double dense_magnitude = 1.0;
  double sparse_magnitude = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// e.g. "A/sigma=10"
  std::string label() const;
};

struct SyntheticInstance {
  Dataset train;
  Dataset test;
  VectorXd beta_star;
  std::vector<Index> support_star;  // ascending
};

/// Rows of X are i.i.d. N(0, Sigma); Y = X beta* + sigma N(0, 1).
/// Deterministic in spec.seed.
SyntheticInstance generate(const ScenarioSpec& spec);

/// Writes X_train.csv, y_train.csv, X_test.csv, y_test.csv, beta_star.csv and
/// meta.json under `dir` (created if needed).
void write_instance(const SyntheticInstance& inst, const ScenarioSpec& spec,
                    const std::filesystem::path& dir);

/// Reads back a directory produced by write_instance. beta_star is optional.
SyntheticInstance read_instance(const std::filesystem::path& dir);

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;
};

/// Comma-separated, header row, every cell numeric and finite.
CsvTable read_numeric_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const MatrixXd& values);

/// Loads `path`, uses `target_column` as Y and every other column as a
/// feature, then splits rows at random into train/test. Rows keep their file
/// order inside each part.
std::pair<Dataset, Dataset> load_csv(const std::filesystem::path& path,
                                     const std::string& target_column, std::uint64_t seed,
                                     double test_fraction = 0.2);

/// Random train/test row split of an in-memory table.
std::pair<Dataset, Dataset> split_rows(const Dataset& d, std::uint64_t seed,
                                       double test_fraction);

}  // namespace mlr
