// mlr: command-line runner for MLR fits, baselines and benchmark studies.

#include "mlr/experiment.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand. Values only override the JSON config
// when the flag was given on the command line.
struct Common {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t permutations = 30;
  int workers = 1;
  double learning_rate = 0.5;
  int max_iterations = 1000;
  double tolerance = 1e-4;
  std::string gate_spread;
  bool no_standardize = false;
  bool freeze_kappa = false;

  CLI::Option* o_out = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_perm = nullptr;
  CLI::Option* o_workers = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_iter = nullptr;
  CLI::Option* o_tol = nullptr;
  CLI::Option* o_spread = nullptr;

  void bind(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
    o_out = app->add_option("-o,--out", out, "Output directory (default: $MLR_OUTPUT_DIR or mlr_out)");
    o_seed = app->add_option("--seed", seed, "Base random seed");
    o_perm = app->add_option("-T,--permutations", permutations, "Label permutations T")
                 ->check(CLI::PositiveNumber);
    o_workers = app->add_option("-j,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    o_lr = app->add_option("--learning-rate", learning_rate, "ADAM learning rate");
    o_iter = app->add_option("--max-iterations", max_iterations, "ADAM iteration cap");
    o_tol = app->add_option("--tolerance", tolerance, "ADAM relative-change tolerance");
    o_spread = app->add_option("--gate-spread", gate_spread, "sum_of_squares | mean_of_squares");
    app->add_flag("--no-standardize", no_standardize, "Center X without rescaling columns");
    app->add_flag("--freeze-kappa", freeze_kappa, "Keep kappa at its initial value");
  }

  mlr::ExperimentConfig load() const {
    mlr::ExperimentConfig cfg;
    if (const char* env = std::getenv("MLR_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      cfg = mlr::experiment_config_from_json(j, cfg);
    }
    if (o_out->count()) cfg.output_dir = out;
    if (o_seed->count()) cfg.seed = seed;
    if (o_perm->count()) cfg.settings.permutations = permutations;
    if (o_workers->count()) cfg.workers = workers;
    if (o_lr->count()) cfg.settings.adam.learning_rate = learning_rate;
    if (o_iter->count()) cfg.settings.adam.max_iterations = max_iterations;
    if (o_tol->count()) cfg.settings.adam.tolerance = tolerance;
    if (o_spread->count()) {
      cfg = mlr::experiment_config_from_json(json{{"gate_spread", gate_spread}}, cfg);
    }
    if (no_standardize) cfg.settings.fit.standardize.scale_x = false;
    if (freeze_kappa) cfg.settings.fit.freeze_kappa = true;
    cfg.settings.adam.validate();
    return cfg;
  }
};

// Scenario flags used by generate / curve / sweep.
struct ScenarioFlags {
  std::string scenario;
  double sigma = 10.0;
  mlr::Index n_train = 100, n_test = 1000, p = 80, sparsity = 8;
  double rho = 0.8;
  CLI::Option *o_scen = nullptr, *o_sigma = nullptr, *o_ntr = nullptr, *o_nte = nullptr,
              *o_p = nullptr, *o_sp = nullptr, *o_rho = nullptr;

  void bind(CLI::App* app) {
    o_scen = app->add_option("-s,--scenario", scenario, "A, B or C");
    o_sigma = app->add_option("--sigma", sigma, "Noise level");
    o_ntr = app->add_option("--n-train", n_train, "Training rows");
    o_nte = app->add_option("--n-test", n_test, "Test rows");
    o_p = app->add_option("--p", p, "Features");
    o_sp = app->add_option("--sparsity", sparsity, "Non-zeros of beta* (B, C)");
    o_rho = app->add_option("--rho", rho, "Toeplitz correlation (A, C)");
  }

  mlr::ScenarioSpec resolve(const mlr::ExperimentConfig& cfg) const {
    mlr::ScenarioSpec s = cfg.scenarios.empty() ? mlr::ScenarioSpec{} : cfg.scenarios.front();
    if (o_scen->count()) s.scenario = mlr::scenario_from_string(scenario);
    if (o_sigma->count()) s.sigma = sigma;
    if (o_ntr->count()) s.n_train = n_train;
    if (o_nte->count()) s.n_test = n_test;
    if (o_p->count()) s.p = p;
    if (o_sp->count()) s.sparsity = sparsity;
    if (o_rho->count()) s.rho = rho;
    s.validate();
    return s;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

int cmd_generate(const Common& c, const ScenarioFlags& sf) {
  const auto cfg = c.load();
  mlr::ScenarioSpec spec = sf.resolve(cfg);
  spec.seed ^= cfg.seed;
  const auto inst = mlr::generate(spec);
  mlr::write_instance(inst, spec, cfg.output_dir);
  std::cout << "wrote scenario " << spec.label() << " (seed " << spec.seed << ") to "
            << cfg.output_dir << "\n";
  return kExitOk;
}

int cmd_fit(const Common& c, const std::string& procedure, const std::string& instance_dir,
            const std::string& csv, const std::string& target, double test_fraction) {
  const auto cfg = c.load();
  const auto proc = mlr::procedure_from_string(procedure);
  mlr::Dataset train, test;
  mlr::VectorXd beta_star;
  if (!instance_dir.empty() == !csv.empty()) {
    throw ConfigError("fit: give exactly one of --instance or --csv");
  }
  if (!instance_dir.empty()) {
    auto inst = mlr::read_instance(instance_dir);
    train = std::move(inst.train);
    test = std::move(inst.test);
    beta_star = std::move(inst.beta_star);
  } else {
    if (target.empty()) throw ConfigError("fit: --csv requires --target");
    std::tie(train, test) = mlr::load_csv(csv, target, cfg.seed, test_fraction);
  }

  const auto f = mlr::run_procedure(proc, train, cfg.settings, mlr::procedure_seed(cfg.seed));
  json out = {{"procedure", procedure},
              {"n_train", train.n()},
              {"n_test", test.n()},
              {"p", train.p()},
              {"intercept", f.intercept},
              {"beta", std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size())},
              {"iterations", f.iterations},
              {"converged", f.converged}};
  if (!train.feature_names.empty()) out["feature_names"] = train.feature_names;
  if (f.selected_lambda) out["lambda"] = *f.selected_lambda;
  if (f.aggregation_weight) out["aggregation_weight"] = *f.aggregation_weight;
  std::cout << procedure << ": n_train=" << train.n() << " p=" << train.p();
  if (f.selected_lambda) std::cout << " lambda=" << fmt(*f.selected_lambda);
  if (f.iterations) std::cout << " iterations=" << f.iterations;
  if (test.n() >= 2) {
    const mlr::VectorXd pred = (test.x * f.beta).array() + f.intercept;
    const double r2 = mlr::r2_score(test.y, pred);
    out["r2_test"] = r2;
    std::cout << " r2_test=" << fmt(r2);
  }
  if (beta_star.size() == f.beta.size()) {
    out["l2_error"] = mlr::l2_error(f.beta, beta_star);
    out["support_accuracy"] = mlr::support_accuracy(f.beta, beta_star, cfg.settings.support_tau);
    std::cout << " support_accuracy=" << fmt(out["support_accuracy"].get<double>());
  }
  std::cout << "\n";
  fs::create_directories(cfg.output_dir);
  std::ofstream(fs::path(cfg.output_dir) / "fit.json") << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_benchmark(const Common& c, const std::vector<std::string>& procedures,
                  const std::vector<std::string>& scenarios, std::optional<std::size_t> reps) {
  auto cfg = c.load();
  if (!procedures.empty()) {
    cfg.procedures.clear();
    for (const auto& p : procedures) cfg.procedures.push_back(mlr::procedure_from_string(p));
  }
  if (!scenarios.empty()) {
    cfg.scenarios.clear();
    // "A:10" -> Scenario A with sigma 10
    for (const auto& s : scenarios) {
      mlr::ScenarioSpec spec;
      const auto colon = s.find(':');
      spec.scenario = mlr::scenario_from_string(s.substr(0, colon));
      if (colon != std::string::npos) spec.sigma = std::stod(s.substr(colon + 1));
      cfg.scenarios.push_back(spec);
    }
  }
  if (reps) cfg.repetitions = *reps;
  if (cfg.scenarios.empty()) {
    for (auto sc : {mlr::Scenario::A, mlr::Scenario::B, mlr::Scenario::C}) {
      for (double sigma : {10.0, 50.0}) {
        mlr::ScenarioSpec s;
        s.scenario = sc;
        s.sigma = sigma;
        cfg.scenarios.push_back(s);
      }
    }
  }
  if (cfg.procedures.empty()) {
    cfg.procedures = {mlr::Procedure::R_MLR, mlr::Procedure::S_MLR, mlr::Procedure::A_MLR,
                      mlr::Procedure::CV_RIDGE, mlr::Procedure::CV_LASSO, mlr::Procedure::CV_ENET};
  }
  cfg.validate();

  const auto rep = mlr::run_benchmark(cfg);
  mlr::write_report(rep, cfg.output_dir);

  for (const auto& s : rep.summaries) {
    if (s.metric != "r2_test") continue;
    std::cout << s.scenario << "  " << mlr::to_string(s.procedure) << "  r2_test mean="
              << fmt(s.stats.mean) << " median=" << fmt(s.stats.median)
              << (s.mw_best ? "  [best]" : "") << "\n";
  }
  std::cout << rep.rows.size() << " rows, " << rep.failures() << " failures -> "
            << cfg.output_dir << "\n";
  if (rep.failures() > 0) {
    for (const auto& r : rep.rows) {
      if (!r.error.empty()) {
        std::cerr << "failed: " << r.scenario << " " << mlr::to_string(r.procedure) << " rep "
                  << r.repetition << ": " << r.error << "\n";
      }
    }
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_curve(const Common& c, const ScenarioFlags& sf, const std::string& family,
              std::size_t grid_size) {
  const auto cfg = c.load();
  const auto spec = sf.resolve(cfg);
  mlr::CvFamily fam;
  if (family == "RIDGE") {
    fam = mlr::CvFamily::ridge;
  } else if (family == "LASSO") {
    fam = mlr::CvFamily::lasso;
  } else {
    throw ConfigError("curve: --family must be RIDGE or LASSO");
  }
  const auto rows = mlr::run_curve(spec, fam, grid_size, cfg.seed, cfg.settings);
  const fs::path path = fs::path(cfg.output_dir) / "curves.csv";
  mlr::write_curve_csv(rows, path);
  for (const auto& r : rows) {
    if (r.mlr_argmin) std::cout << "MLR argmin   lambda=" << fmt(r.lambda) << " r2_test=" << fmt(r.r2_test) << "\n";
    if (r.cv_argmin) std::cout << "CV argmin    lambda=" << fmt(r.lambda) << " r2_test=" << fmt(r.r2_test) << "\n";
    if (r.r2_argmax) std::cout << "best r2_test lambda=" << fmt(r.lambda) << " r2_test=" << fmt(r.r2_test) << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, const ScenarioFlags& sf, const std::vector<std::size_t>& t_values,
              std::size_t reps, const std::string& family, bool ablation) {
  const auto cfg = c.load();
  const auto spec = sf.resolve(cfg);
  const auto rows = mlr::run_permutation_sweep(spec, t_values, reps, cfg.seed, cfg.settings,
                                               mlr::family_from_string(family), ablation,
                                               cfg.workers);
  const fs::path path = fs::path(cfg.output_dir) / "sweep.csv";
  mlr::write_sweep_csv(rows, path);
  for (const auto& r : rows) {
    std::cout << r.label << "  r2_test " << fmt(r.r2_mean) << " +- " << fmt(r.r2_sd)
              << "  iterations " << fmt(r.iterations_mean) << "\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

// Reads one numeric column, optionally keeping only rows whose `filter_col`
// equals one of the given values.
std::vector<double> read_column(const std::string& path, const std::string& column,
                                const std::vector<std::pair<std::string, std::string>>& filters) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : l) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else if (ch != '\r') {
        cell += ch;
      }
    }
    cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ConfigError(path + ": no column '" + name + "'");
  };
  const std::size_t col = index_of(column);
  std::vector<std::pair<std::size_t, std::string>> fidx;
  for (const auto& [k, v] : filters) fidx.emplace_back(index_of(k), v);
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) continue;
    bool keep = true;
    for (const auto& [i, v] : fidx) keep = keep && cells[i] == v;
    if (!keep || cells[col].empty()) continue;
    try {
      const double x = std::stod(cells[col]);
      if (std::isfinite(x)) values.push_back(x);
    } catch (const std::exception&) {
      throw ConfigError(path + ": column '" + column + "' is not numeric");
    }
  }
  return values;
}

int cmd_mwtest(const std::string& file, const std::string& metric, const std::string& a,
               const std::string& b, const std::string& scenario, const std::string& file_b,
               const std::string& column_b) {
  std::vector<double> xa, xb;
  if (!a.empty() || !b.empty()) {
    // per_repetition.csv: compare two procedures on one metric.
    if (a.empty() || b.empty()) throw ConfigError("mwtest: give both --a and --b");
    std::vector<std::pair<std::string, std::string>> fa = {{"procedure", a}};
    std::vector<std::pair<std::string, std::string>> fb = {{"procedure", b}};
    if (!scenario.empty()) {
      fa.emplace_back("scenario", scenario);
      fb.emplace_back("scenario", scenario);
    }
    xa = read_column(file, metric, fa);
    xb = read_column(file, metric, fb);
  } else {
    // Two arbitrary numeric columns.
    xa = read_column(file, metric, {});
    xb = read_column(file_b.empty() ? file : file_b, column_b.empty() ? metric : column_b, {});
  }
  if (xa.empty() || xb.empty()) throw ConfigError("mwtest: a selected sample is empty");
  const auto r = mlr::mann_whitney_u(xa, xb);
  json out = {{"n_a", xa.size()},   {"n_b", xb.size()},         {"u", r.u},
              {"p_value", r.p_value}, {"exact", r.exact}};
  std::cout << out.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MLR: permutation-based hyperparameter calibration for linear regression"};
  app.require_subcommand(1);

  Common c_gen, c_fit, c_bench, c_curve, c_sweep;
  ScenarioFlags s_gen, s_curve, s_sweep;

  auto* gen = app.add_subcommand("generate", "Write a synthetic train/test instance");
  c_gen.bind(gen);
  s_gen.bind(gen);

  auto* fit = app.add_subcommand("fit", "Fit one procedure on one dataset");
  c_fit.bind(fit);
  std::string procedure = "R_MLR", instance_dir, csv, target;
  double test_fraction = 0.2;
  fit->add_option("-p,--procedure", procedure, "R_MLR, S_MLR, A_MLR, CV_RIDGE, ...");
  fit->add_option("--instance", instance_dir, "Directory written by `generate`")
      ->check(CLI::ExistingDirectory);
  fit->add_option("--csv", csv, "CSV file with a header row")->check(CLI::ExistingFile);
  fit->add_option("--target", target, "Response column of --csv");
  fit->add_option("--test-fraction", test_fraction, "Held-out share of --csv rows")
      ->check(CLI::Range(0.0, 1.0));

  auto* bench = app.add_subcommand("benchmark", "Scenarios x procedures x repetitions");
  c_bench.bind(bench);
  std::vector<std::string> procs, scens;
  std::size_t reps = 20;
  bench->add_option("--procedures", procs, "Procedures to run")->delimiter(',');
  bench->add_option("--scenarios", scens, "Scenarios as LETTER[:sigma], e.g. A:10,B:50")
      ->delimiter(',');
  auto* o_reps = bench->add_option("-r,--repetitions", reps, "Repetitions per scenario")
                     ->check(CLI::PositiveNumber);

  auto* curve = app.add_subcommand("curve", "MLR, CV and test R^2 along a lambda grid");
  c_curve.bind(curve);
  s_curve.bind(curve);
  std::string curve_family = "RIDGE";
  std::size_t grid_size = 50;
  curve->add_option("--family", curve_family, "RIDGE or LASSO");
  curve->add_option("--grid-size", grid_size, "Grid points")->check(CLI::Range(2, 100000));

  auto* sweep = app.add_subcommand("sweep", "Test R^2 as a function of T");
  c_sweep.bind(sweep);
  s_sweep.bind(sweep);
  std::vector<std::size_t> t_values = {1, 3, 10, 30};
  std::size_t sweep_reps = 20;
  std::string sweep_family = "RIDGE";
  bool ablation = false;
  sweep->add_option("--t-values", t_values, "Permutation counts")->delimiter(',');
  sweep->add_option("-r,--repetitions", sweep_reps, "Repetitions")->check(CLI::PositiveNumber);
  sweep->add_option("--family", sweep_family, "RIDGE, SPARSE or AGGREGATED");
  sweep->add_flag("--ablation", ablation, "Add a fit-term-only row");

  auto* mw = app.add_subcommand("mwtest", "Two-sided Mann-Whitney test between two columns");
  std::string mw_file, mw_metric = "r2_test", mw_a, mw_b, mw_scenario, mw_file_b, mw_col_b;
  mw->add_option("file", mw_file, "CSV file (e.g. per_repetition.csv)")
      ->required()
      ->check(CLI::ExistingFile);
  mw->add_option("--metric,--column", mw_metric, "Numeric column of the first sample");
  mw->add_option("--a", mw_a, "Procedure for sample a (per_repetition.csv)");
  mw->add_option("--b", mw_b, "Procedure for sample b (per_repetition.csv)");
  mw->add_option("--scenario", mw_scenario, "Restrict to one scenario label");
  mw->add_option("--file-b", mw_file_b, "CSV holding the second column (default: same file)");
  mw->add_option("--column-b", mw_col_b, "Numeric column of the second sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(c_gen, s_gen);
    if (*fit) return cmd_fit(c_fit, procedure, instance_dir, csv, target, test_fraction);
    if (*bench) {
      return cmd_benchmark(c_bench, procs, scens,
                           o_reps->count() ? std::optional<std::size_t>(reps) : std::nullopt);
    }
    if (*curve) return cmd_curve(c_curve, s_curve, curve_family, grid_size);
    if (*sweep) {
      return cmd_sweep(c_sweep, s_sweep, t_values, sweep_reps, sweep_family, ablation);
    }
    if (*mw) return cmd_mwtest(mw_file, mw_metric, mw_a, mw_b, mw_scenario, mw_file_b, mw_col_b);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
