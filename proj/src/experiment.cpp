#include "mlr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace mlr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ProcName {
  Procedure proc;
  const char* name;
};

constexpr ProcName kProcNames[] = {
    {Procedure::R_MLR, "R_MLR"},
    {Procedure::S_MLR, "S_MLR"},
    {Procedure::A_MLR, "A_MLR"},
    {Procedure::CV_RIDGE, "CV_RIDGE"},
    {Procedure::CV_LASSO, "CV_LASSO"},
    {Procedure::CV_ENET, "CV_ENET"},
    {Procedure::GRID_MLR_RIDGE, "GRID_MLR_RIDGE"},
    {Procedure::GRID_MLR_LASSO, "GRID_MLR_LASSO"},
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Procedure p) {
  for (const auto& e : kProcNames) {
    if (e.proc == p) return e.name;
  }
  return "?";
}

Procedure procedure_from_string(std::string_view s) {
  for (const auto& e : kProcNames) {
    if (s == e.name) return e.proc;
  }
  std::string known;
  for (const auto& e : kProcNames) known += std::string(known.empty() ? "" : ", ") + e.name;
  throw std::invalid_argument("unknown procedure '" + std::string(s) + "' (known: " + known + ")");
}

const std::vector<Procedure>& all_procedures() {
  static const std::vector<Procedure> all = [] {
    std::vector<Procedure> v;
    for (const auto& e : kProcNames) v.push_back(e.proc);
    return v;
  }();
  return all;
}

std::uint64_t procedure_seed(std::uint64_t data_seed) { return splitmix64(data_seed); }

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t nthreads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Procedures

namespace {

// LASSO fit along a grid, with the same solver settings as the CV baselines.
VectorXd grid_lasso(double lambda, const MatrixXd& x, const VectorXd& y) {
  const CvConfig defaults;
  return lasso_cd(lambda, x, y, defaults.cd_tolerance, defaults.cd_max_iter).beta;
}

std::vector<double> lambda_grid_for(CvFamily family, const Dataset& train, std::size_t size) {
  return family == CvFamily::ridge ? default_ridge_grid(size) : default_l1_grid(train, size);
}

ProcedureFit from_cv(CvFamily family, const Dataset& train, const ProcedureSettings& s,
                     std::uint64_t seed) {
  CvConfig cfg;
  cfg.n_folds = s.cv_folds;
  cfg.seed = seed;
  cfg.lambda_grid = lambda_grid_for(family, train, s.grid_size);
  if (family == CvFamily::elastic_net) {
    cfg.l1_ratio_grid = default_l1_ratio_grid();
    cfg.scale_by_l1_ratio = true;
  }
  const CvResult cv = cv_grid_search(family, train, cfg);
  ProcedureFit f;
  f.beta = cv.beta;
  f.intercept = cv.intercept;
  f.selected_lambda = cv.best.lambda;
  return f;
}

ProcedureFit from_grid_mlr(CvFamily family, const Dataset& train, const ProcedureSettings& s,
                           std::uint64_t seed) {
  auto [data, st] = standardize(train, s.fit.standardize);
  PermutationSet perms = sample_permutations(data.n(), s.permutations, s.fit.derangements, seed);
  const auto grid = lambda_grid_for(family, train, s.grid_size);
  VectorXd beta_std;
  double chosen = 0.0;
  if (family == CvFamily::ridge) {
    std::vector<HyperParams> hps;
    hps.reserve(grid.size());
    for (double l : grid) hps.push_back(HyperParams::ridge_only(l, data.p()));
    const CriterionContext ctx(data, std::move(perms), Family::ridge, s.fit.criterion);
    const GridSelection sel = grid_select(ctx, hps);
    chosen = sel.best.lambda();
    beta_std = ridge(chosen, data.x, data.y);
  } else {
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double lam = grid[i];
      const Estimator est = [lam](const MatrixXd& x, const VectorXd& y) {
        return grid_lasso(lam, x, y);
      };
      const double v = mlr_value(data, perms, est, s.fit.criterion.fit_term_only).value;
      // Ascending grid: "<=" hands exact ties to the larger lambda.
      if (v <= best_value) {
        best_value = v;
        best = i;
      }
    }
    chosen = grid[best];
    beta_std = grid_lasso(chosen, data.x, data.y);
  }
  ProcedureFit f;
  std::tie(f.beta, f.intercept) = st.to_original(beta_std);
  f.selected_lambda = chosen;
  return f;
}

}  // namespace

ProcedureFit run_procedure(Procedure proc, const Dataset& train, const ProcedureSettings& s,
                           std::uint64_t seed) {
  auto from_mlr = [&](Family family) {
    const FitResult r = fit_mlr(family, train, s.adam, s.permutations, seed, s.fit);
    ProcedureFit f;
    f.beta = r.beta;
    f.intercept = r.intercept;
    f.iterations = r.iterations;
    f.converged = r.converged;
    f.aggregation_weight = r.aggregation_weight;
    f.selected_lambda = r.theta.lambda();
    return f;
  };
  switch (proc) {
    case Procedure::R_MLR: return from_mlr(Family::ridge);
    case Procedure::S_MLR: return from_mlr(Family::sparse);
    case Procedure::A_MLR: return from_mlr(Family::aggregated);
    case Procedure::CV_RIDGE: return from_cv(CvFamily::ridge, train, s, seed);
    case Procedure::CV_LASSO: return from_cv(CvFamily::lasso, train, s, seed);
    case Procedure::CV_ENET: return from_cv(CvFamily::elastic_net, train, s, seed);
    case Procedure::GRID_MLR_RIDGE: return from_grid_mlr(CvFamily::ridge, train, s, seed);
    case Procedure::GRID_MLR_LASSO: return from_grid_mlr(CvFamily::lasso, train, s, seed);
  }
  throw std::invalid_argument("unknown procedure");
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("config: no scenarios");
  if (procedures.empty()) throw std::invalid_argument("config: no procedures");
  if (repetitions < 1) throw std::invalid_argument("config: repetitions must be >= 1");
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (settings.permutations < 1) throw std::invalid_argument("config: permutations must be >= 1");
  if (settings.cv_folds < 2) throw std::invalid_argument("config: cv_folds must be >= 2");
  if (settings.grid_size < 2) throw std::invalid_argument("config: grid_size must be >= 2");
  if (!(settings.support_tau > 0.0)) throw std::invalid_argument("config: support_tau must be > 0");
  settings.adam.validate();
  for (const auto& s : scenarios) s.validate();
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

GateSpread spread_from_string(const std::string& s) {
  if (s == "sum_of_squares" || s == "sum") return GateSpread::sum_of_squares;
  if (s == "mean_of_squares" || s == "mean") return GateSpread::mean_of_squares;
  throw std::invalid_argument("unknown gate_spread '" + s + "'");
}

std::string to_string(GateSpread s) {
  return s == GateSpread::sum_of_squares ? "sum_of_squares" : "mean_of_squares";
}

}  // namespace

ScenarioSpec scenario_from_json(const json& j, ScenarioSpec base) {
  reject_unknown_keys(j,
                      {"scenario", "n_train", "n_test", "p", "sigma", "rho", "sparsity",
                       "dense_magnitude", "sparse_magnitude", "seed"},
                      "scenario");
  if (j.contains("scenario")) base.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  read_key(j, "n_train", base.n_train);
  read_key(j, "n_test", base.n_test);
  read_key(j, "p", base.p);
  read_key(j, "sigma", base.sigma);
  read_key(j, "rho", base.rho);
  read_key(j, "sparsity", base.sparsity);
  read_key(j, "dense_magnitude", base.dense_magnitude);
  read_key(j, "sparse_magnitude", base.sparse_magnitude);
  read_key(j, "seed", base.seed);
  base.validate();
  return base;
}

json to_json(const ScenarioSpec& s) {
  return {{"scenario", std::string(to_string(s.scenario))},
          {"n_train", s.n_train},
          {"n_test", s.n_test},
          {"p", s.p},
          {"sigma", s.sigma},
          {"rho", s.rho},
          {"sparsity", s.sparsity},
          {"dense_magnitude", s.dense_magnitude},
          {"sparse_magnitude", s.sparse_magnitude},
          {"seed", s.seed}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig cfg) {
  reject_unknown_keys(j,
                      {"scenarios", "procedures", "repetitions", "seed", "workers", "output_dir",
                       "permutations", "adam", "cv_folds", "grid_size", "support_tau",
                       "gate_spread", "standardize_x", "freeze_kappa", "derangements"},
                      "config");
  if (j.contains("scenarios")) {
    cfg.scenarios.clear();
    for (const auto& sj : j.at("scenarios")) {
      // "sigma": [10, 50] expands to one scenario per value.
      if (sj.is_object() && sj.contains("sigma") && sj.at("sigma").is_array()) {
        for (const auto& sigma : sj.at("sigma")) {
          json one = sj;
          one["sigma"] = sigma;
          cfg.scenarios.push_back(scenario_from_json(one));
        }
      } else {
        cfg.scenarios.push_back(scenario_from_json(sj));
      }
    }
  }
  if (j.contains("procedures")) {
    cfg.procedures.clear();
    for (const auto& p : j.at("procedures")) {
      cfg.procedures.push_back(procedure_from_string(p.get<std::string>()));
    }
  }
  read_key(j, "repetitions", cfg.repetitions);
  read_key(j, "seed", cfg.seed);
  read_key(j, "workers", cfg.workers);
  read_key(j, "output_dir", cfg.output_dir);
  read_key(j, "permutations", cfg.settings.permutations);
  read_key(j, "cv_folds", cfg.settings.cv_folds);
  read_key(j, "grid_size", cfg.settings.grid_size);
  read_key(j, "support_tau", cfg.settings.support_tau);
  read_key(j, "standardize_x", cfg.settings.fit.standardize.scale_x);
  read_key(j, "freeze_kappa", cfg.settings.fit.freeze_kappa);
  read_key(j, "derangements", cfg.settings.fit.derangements);
  if (j.contains("gate_spread")) {
    cfg.settings.fit.criterion.spread = spread_from_string(j.at("gate_spread").get<std::string>());
  }
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    reject_unknown_keys(a,
                        {"learning_rate", "beta1", "beta2", "epsilon", "tolerance",
                         "max_iterations", "value_floor"},
                        "adam");
    auto& c = cfg.settings.adam;
    read_key(a, "learning_rate", c.learning_rate);
    read_key(a, "beta1", c.beta1);
    read_key(a, "beta2", c.beta2);
    read_key(a, "epsilon", c.epsilon);
    read_key(a, "tolerance", c.tolerance);
    read_key(a, "max_iterations", c.max_iterations);
    read_key(a, "value_floor", c.value_floor);
    c.validate();
  }
  // Scenarios may still be filled in by the caller; everything else must be
  // usable as read.
  if (j.contains("procedures") && cfg.procedures.empty()) {
    throw std::invalid_argument("config: no procedures");
  }
  if (j.contains("scenarios") && cfg.scenarios.empty()) {
    throw std::invalid_argument("config: no scenarios");
  }
  ExperimentConfig probe = cfg;
  if (probe.scenarios.empty()) probe.scenarios.emplace_back();
  if (probe.procedures.empty()) probe.procedures.push_back(Procedure::R_MLR);
  probe.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json scen = json::array();
  for (const auto& s : cfg.scenarios) scen.push_back(to_json(s));
  json procs = json::array();
  for (auto p : cfg.procedures) procs.push_back(std::string(to_string(p)));
  const auto& a = cfg.settings.adam;
  return {{"scenarios", scen},
          {"procedures", procs},
          {"repetitions", cfg.repetitions},
          {"seed", cfg.seed},
          {"workers", cfg.workers},
          {"output_dir", cfg.output_dir},
          {"permutations", cfg.settings.permutations},
          {"cv_folds", cfg.settings.cv_folds},
          {"grid_size", cfg.settings.grid_size},
          {"support_tau", cfg.settings.support_tau},
          {"gate_spread", to_string(cfg.settings.fit.criterion.spread)},
          {"standardize_x", cfg.settings.fit.standardize.scale_x},
          {"freeze_kappa", cfg.settings.fit.freeze_kappa},
          {"derangements", cfg.settings.fit.derangements},
          {"adam",
           {{"learning_rate", a.learning_rate},
            {"beta1", a.beta1},
            {"beta2", a.beta2},
            {"epsilon", a.epsilon},
            {"tolerance", a.tolerance},
            {"max_iterations", a.max_iterations},
            {"value_floor", a.value_floor}}}};
}

// ---------------------------------------------------------------------------
// Benchmark

std::size_t ExperimentReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); }));
}

namespace {

std::vector<std::string> unique_labels(const std::vector<ScenarioSpec>& specs) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& s : specs) {
    std::string l = s.label();
    const int k = seen[l]++;
    if (k > 0) l += "#" + std::to_string(k);
    labels.push_back(l);
  }
  return labels;
}

RepetitionRow score_cell(Procedure proc, const SyntheticInstance& inst, const ProcedureSettings& s,
                         std::uint64_t seed) {
  RepetitionRow row;
  row.procedure = proc;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ProcedureFit f = run_procedure(proc, inst.train, s, seed);
    const VectorXd pred = (inst.test.x * f.beta).array() + f.intercept;
    row.r2_test = r2_score(inst.test.y, pred);
    row.l2_error = l2_error(f.beta, inst.beta_star);
    row.support_accuracy = support_accuracy(f.beta, inst.beta_star, s.support_tau);
    row.iterations = f.iterations;
    row.converged = f.converged;
    row.aggregation_weight = f.aggregation_weight;
    row.selected_lambda = f.selected_lambda;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.r2_test = row.l2_error = row.support_accuracy = kNaN;
    row.converged = false;
  }
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

void summarize_report(ExperimentReport& rep, const std::vector<std::string>& labels) {
  struct Metric {
    const char* name;
    bool higher_is_better;
    double RepetitionRow::*field;
  };
  static const Metric metrics[] = {{"r2_test", true, &RepetitionRow::r2_test},
                                   {"l2_error", false, &RepetitionRow::l2_error},
                                   {"support_accuracy", true, &RepetitionRow::support_accuracy}};
  const auto& procs = rep.config.procedures;
  for (const auto& label : labels) {
    for (const auto& m : metrics) {
      std::vector<std::vector<double>> samples(procs.size());
      for (const auto& row : rep.rows) {
        if (row.scenario != label || !row.error.empty()) continue;
        const auto k = static_cast<std::size_t>(
            std::find(procs.begin(), procs.end(), row.procedure) - procs.begin());
        samples[k].push_back(row.*(m.field));
      }
      const auto best = mw_best_set(samples, m.higher_is_better);
      for (std::size_t k = 0; k < procs.size(); ++k) {
        rep.summaries.push_back({label, procs[k], m.name, summarize(samples[k]), best[k]});
      }
      for (std::size_t a = 0; a < procs.size(); ++a) {
        for (std::size_t b = a + 1; b < procs.size(); ++b) {
          if (samples[a].empty() || samples[b].empty()) continue;
          const auto r = mann_whitney_u(samples[a], samples[b]);
          rep.mw_matrix.push_back({label, m.name, procs[a], procs[b], r.u, r.p_value});
        }
      }
    }
    std::vector<double> iters;
    for (std::size_t k = 0; k < procs.size(); ++k) {
      iters.clear();
      for (const auto& row : rep.rows) {
        if (row.scenario == label && row.procedure == procs[k] && row.error.empty()) {
          iters.push_back(row.iterations);
        }
      }
      rep.summaries.push_back({label, procs[k], "iterations", summarize(iters), false});
    }
  }
}

}  // namespace

ExperimentReport run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto labels = unique_labels(cfg.scenarios);
  const std::size_t n_cells = cfg.scenarios.size() * cfg.repetitions;
  const std::size_t n_proc = cfg.procedures.size();
  std::vector<RepetitionRow> slots(n_cells * n_proc);

  parallel_for(n_cells, cfg.workers, [&](std::size_t cell) {
    const std::size_t si = cell / cfg.repetitions;
    const std::size_t r = cell % cfg.repetitions;
    ScenarioSpec spec = cfg.scenarios[si];
    const std::uint64_t data_seed = cfg.seed ^ spec.seed ^ static_cast<std::uint64_t>(r);
    spec.seed = data_seed;
    std::optional<SyntheticInstance> inst;
    std::string gen_error;
    try {
      inst = generate(spec);
    } catch (const std::exception& e) {
      gen_error = std::string("data generation: ") + e.what();
    }
    for (std::size_t k = 0; k < n_proc; ++k) {
      RepetitionRow row;
      if (inst) {
        row = score_cell(cfg.procedures[k], *inst, cfg.settings, procedure_seed(data_seed));
      } else {
        row.procedure = cfg.procedures[k];
        row.error = gen_error;
        row.r2_test = row.l2_error = row.support_accuracy = kNaN;
        row.converged = false;
      }
      row.scenario = labels[si];
      row.repetition = r;
      slots[cell * n_proc + k] = std::move(row);
    }
  });

  ExperimentReport rep;
  rep.config = cfg;
  rep.rows = std::move(slots);
  summarize_report(rep, labels);
  return rep;
}

// ---------------------------------------------------------------------------
// Curve and sweep

std::vector<CurveRow> run_curve(const ScenarioSpec& spec, CvFamily family, std::size_t grid_size,
                                std::uint64_t seed, const ProcedureSettings& s) {
  if (grid_size < 2) throw std::invalid_argument("curve: grid_size must be >= 2");
  if (family == CvFamily::elastic_net) {
    throw std::invalid_argument("curve: family must be RIDGE or LASSO");
  }
  ScenarioSpec sp = spec;
  sp.seed = seed ^ spec.seed;
  const SyntheticInstance inst = generate(sp);
  const std::uint64_t pseed = procedure_seed(sp.seed);
  const auto grid = lambda_grid_for(family, inst.train, grid_size);

  auto [data, st] = standardize(inst.train, s.fit.standardize);
  PermutationSet perms = sample_permutations(data.n(), s.permutations, s.fit.derangements, pseed);

  std::vector<double> mlr(grid.size());
  std::vector<double> r2(grid.size());
  std::vector<VectorXd> betas(grid.size());
  if (family == CvFamily::ridge) {
    std::vector<HyperParams> hps;
    for (double l : grid) hps.push_back(HyperParams::ridge_only(l, data.p()));
    const CriterionContext ctx(data, perms, Family::ridge, s.fit.criterion);
    mlr = grid_select(ctx, hps).curve;
    for (std::size_t i = 0; i < grid.size(); ++i) betas[i] = ridge(grid[i], data.x, data.y);
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double lam = grid[i];
      const Estimator est = [lam](const MatrixXd& x, const VectorXd& y) {
        return grid_lasso(lam, x, y);
      };
      mlr[i] = mlr_value(data, perms, est, s.fit.criterion.fit_term_only).value;
      betas[i] = grid_lasso(lam, data.x, data.y);
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto [beta, intercept] = st.to_original(betas[i]);
    r2[i] = r2_score(inst.test.y, ((inst.test.x * beta).array() + intercept).matrix());
  }

  CvConfig cv;
  cv.n_folds = s.cv_folds;
  cv.seed = pseed;
  cv.lambda_grid = grid;
  const CvResult cvr = cv_grid_search(family, inst.train, cv);

  const auto mlr_r = rescale_curve(mlr);
  const auto cv_r = rescale_curve(cvr.cv_curve);
  const auto r2_r = rescale_curve(r2);

  // Ties go to the larger lambda for both criteria and for the R^2 maximum.
  std::size_t i_mlr = 0, i_cv = 0, i_r2 = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (mlr[i] <= mlr[i_mlr]) i_mlr = i;
    if (cvr.cv_curve[i] <= cvr.cv_curve[i_cv]) i_cv = i;
    if (r2[i] >= r2[i_r2]) i_r2 = i;
  }

  std::vector<CurveRow> rows(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows[i] = {i,        grid[i], mlr[i],     cvr.cv_curve[i], r2[i],     mlr_r[i],
               cv_r[i],  r2_r[i], i == i_mlr, i == i_cv,       i == i_r2};
  }
  return rows;
}

std::vector<SweepRow> run_permutation_sweep(const ScenarioSpec& spec,
                                            const std::vector<std::size_t>& t_values,
                                            std::size_t repetitions, std::uint64_t seed,
                                            const ProcedureSettings& s, Family family,
                                            bool ablation, int workers) {
  if (t_values.empty()) throw std::invalid_argument("sweep: no T values");
  for (auto t : t_values) {
    if (t < 1) throw std::invalid_argument("sweep: every T must be >= 1");
  }
  if (repetitions < 1) throw std::invalid_argument("sweep: repetitions must be >= 1");

  struct Config {
    std::string label;
    std::size_t t;
    bool fit_term_only;
  };
  std::vector<Config> configs;
  for (auto t : t_values) configs.push_back({"T=" + std::to_string(t), t, false});
  if (ablation) configs.push_back({"fit_term_only", 0, true});

  std::vector<double> r2(configs.size() * repetitions);
  std::vector<double> iters(configs.size() * repetitions);
  parallel_for(repetitions, workers, [&](std::size_t r) {
    ScenarioSpec sp = spec;
    sp.seed = seed ^ spec.seed ^ static_cast<std::uint64_t>(r);
    const SyntheticInstance inst = generate(sp);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      FitOptions opts = s.fit;
      opts.criterion.fit_term_only = configs[c].fit_term_only;
      const FitResult fr =
          fit_mlr(family, inst.train, s.adam, configs[c].t, procedure_seed(sp.seed), opts);
      r2[c * repetitions + r] = r2_score(inst.test.y, fr.predict(inst.test.x));
      iters[c * repetitions + r] = fr.iterations;
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const auto begin = static_cast<std::ptrdiff_t>(c * repetitions);
    const auto end = begin + static_cast<std::ptrdiff_t>(repetitions);
    const Summary sr = summarize({r2.begin() + begin, r2.begin() + end});
    const Summary si = summarize({iters.begin() + begin, iters.begin() + end});
    rows.push_back({configs[c].label, configs[c].t, repetitions, sr.mean, sr.sd, si.mean, si.sd});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

// Quotes a field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const std::vector<std::string>& per_repetition_columns() {
  static const std::vector<std::string> cols = {
      "scenario",   "procedure",  "repetition",   "r2_test",        "l2_error",
      "support_accuracy", "iterations", "converged", "wall_seconds", "aggregation_weight",
      "selected_lambda", "error"};
  return cols;
}

const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols = {
      "scenario", "procedure", "metric", "count", "mean", "sd",     "min",
      "q1",       "median",    "q3",     "max",   "mw_best"};
  return cols;
}

const std::vector<std::string>& curve_columns() {
  static const std::vector<std::string> cols = {
      "index",        "lambda",      "mlr",         "cv_mse",     "r2_test",  "mlr_rescaled",
      "cv_rescaled",  "r2_rescaled", "mlr_argmin",  "cv_argmin",  "r2_argmax"};
  return cols;
}

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols = {
      "label", "permutations", "repetitions", "r2_mean", "r2_sd", "iterations_mean",
      "iterations_sd"};
  return cols;
}

void write_per_repetition_csv(const ExperimentReport& rep, const fs::path& path) {
  auto out = open_out(path);
  write_header(out, per_repetition_columns());
  for (const auto& r : rep.rows) {
    out << csv_field(r.scenario) << ',' << to_string(r.procedure) << ',' << r.repetition << ','
        << num(r.r2_test) << ',' << num(r.l2_error) << ',' << num(r.support_accuracy) << ','
        << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << num(r.wall_seconds) << ','
        << opt_num(r.aggregation_weight) << ',' << opt_num(r.selected_lambda) << ','
        << csv_field(r.error) << '\n';
  }
}

void write_summary_csv(const ExperimentReport& rep, const fs::path& path) {
  auto out = open_out(path);
  write_header(out, summary_columns());
  for (const auto& s : rep.summaries) {
    const auto& t = s.stats;
    out << csv_field(s.scenario) << ',' << to_string(s.procedure) << ',' << s.metric << ','
        << t.count << ',' << num(t.mean) << ',' << num(t.sd) << ',' << num(t.min) << ','
        << num(t.q1) << ',' << num(t.median) << ',' << num(t.q3) << ',' << num(t.max) << ','
        << (s.mw_best ? 1 : 0) << '\n';
  }
}

json to_json(const ExperimentReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"scenario", r.scenario},
                    {"procedure", std::string(to_string(r.procedure))},
                    {"repetition", r.repetition},
                    {"r2_test", num_json(r.r2_test)},
                    {"l2_error", num_json(r.l2_error)},
                    {"support_accuracy", num_json(r.support_accuracy)},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"wall_seconds", r.wall_seconds},
                    {"aggregation_weight", opt_json(r.aggregation_weight)},
                    {"selected_lambda", opt_json(r.selected_lambda)},
                    {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
  }
  json sums = json::array();
  for (const auto& s : rep.summaries) {
    const auto& t = s.stats;
    sums.push_back({{"scenario", s.scenario},
                    {"procedure", std::string(to_string(s.procedure))},
                    {"metric", s.metric},
                    {"count", t.count},
                    {"mean", num_json(t.mean)},
                    {"sd", num_json(t.sd)},
                    {"min", num_json(t.min)},
                    {"q1", num_json(t.q1)},
                    {"median", num_json(t.median)},
                    {"q3", num_json(t.q3)},
                    {"max", num_json(t.max)},
                    {"mw_best", s.mw_best}});
  }
  json mw = json::array();
  for (const auto& m : rep.mw_matrix) {
    mw.push_back({{"scenario", m.scenario},
                  {"metric", m.metric},
                  {"a", std::string(to_string(m.a))},
                  {"b", std::string(to_string(m.b))},
                  {"u", m.u},
                  {"p_value", m.p_value}});
  }
  return {{"config", to_json(rep.config)},
          {"failures", rep.failures()},
          {"per_repetition", rows},
          {"summaries", sums},
          {"mw_matrix", mw}};
}

void write_report(const ExperimentReport& rep, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "report.json");
    out << to_json(rep).dump(2) << '\n';
  }
  write_per_repetition_csv(rep, dir / "per_repetition.csv");
  write_summary_csv(rep, dir / "summary.csv");
}

void write_curve_csv(const std::vector<CurveRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  write_header(out, curve_columns());
  for (const auto& r : rows) {
    out << r.index << ',' << num(r.lambda) << ',' << num(r.mlr) << ',' << num(r.cv_mse) << ','
        << num(r.r2_test) << ',' << num(r.mlr_rescaled) << ',' << num(r.cv_rescaled) << ','
        << num(r.r2_rescaled) << ',' << (r.mlr_argmin ? 1 : 0) << ',' << (r.cv_argmin ? 1 : 0)
        << ',' << (r.r2_argmax ? 1 : 0) << '\n';
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  write_header(out, sweep_columns());
  for (const auto& r : rows) {
    out << r.label << ',' << r.permutations << ',' << r.repetitions << ',' << num(r.r2_mean)
        << ',' << num(r.r2_sd) << ',' << num(r.iterations_mean) << ',' << num(r.iterations_sd)
        << '\n';
  }
}

}  // namespace mlr
