#include "mlr/datagen.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mlr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::A: return "A";
    case Scenario::B: return "B";
    case Scenario::C: return "C";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view s) {
  if (s == "A" || s == "a") return Scenario::A;
  if (s == "B" || s == "b") return Scenario::B;
  if (s == "C" || s == "c") return Scenario::C;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "' (expected A, B or C)");
}

void ScenarioSpec::validate() const {
  if (n_train < 2) throw std::invalid_argument("scenario: n_train must be >= 2");
  if (n_test < 1) throw std::invalid_argument("scenario: n_test must be >= 1");
  if (p < 1) throw std::invalid_argument("scenario: p must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("scenario: sigma must be finite and >= 0");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("scenario: rho must be in [0,1)");
  if (sparsity < 0 || sparsity > p) throw std::invalid_argument("scenario: need 0 <= sparsity <= p");
}

std::string ScenarioSpec::label() const {
  std::ostringstream os;
  os << to_string(scenario) << "/sigma=" << sigma;
  return os.str();
}

namespace {

// Rows of N(0, rho^|i-j|) via the stationary AR(1) recursion along columns.
MatrixXd draw_design(Index n, Index p, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(n, p);
  const double innov = std::sqrt(1.0 - rho * rho);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = normal(rng);
    for (Index j = 1; j < p; ++j) x(i, j) = rho * x(i, j - 1) + innov * normal(rng);
  }
  return x;
}

VectorXd draw_noise(Index n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd e(n);
  for (Index i = 0; i < n; ++i) e(i) = sigma * normal(rng);
  return e;
}

std::vector<std::string> column_names(const std::string& prefix, Index count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (Index j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j));
  return names;
}

}  // namespace

SyntheticInstance generate(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Index p = spec.p;

  VectorXd beta = VectorXd::Zero(p);
  std::bernoulli_distribution coin(0.5);
  if (spec.scenario == Scenario::A) {
    for (Index j = 0; j < p; ++j) beta(j) = coin(rng) ? spec.dense_magnitude : -spec.dense_magnitude;
  } else {
    std::vector<Index> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Index k = 0; k < spec.sparsity; ++k) {
      beta(idx[static_cast<std::size_t>(k)]) =
          coin(rng) ? spec.sparse_magnitude : -spec.sparse_magnitude;
    }
  }

  const double rho = spec.scenario == Scenario::B ? 0.0 : spec.rho;
  SyntheticInstance inst;
  inst.beta_star = beta;
  for (Index j = 0; j < p; ++j) {
    if (beta(j) != 0.0) inst.support_star.push_back(j);
  }
  const auto names = column_names("x", p);

  MatrixXd xtr = draw_design(spec.n_train, p, rho, rng);
  VectorXd ytr = xtr * beta + draw_noise(spec.n_train, spec.sigma, rng);
  MatrixXd xte = draw_design(spec.n_test, p, rho, rng);
  VectorXd yte = xte * beta + draw_noise(spec.n_test, spec.sigma, rng);
  inst.train = Dataset{std::move(xtr), std::move(ytr), names};
  inst.test = Dataset{std::move(xte), std::move(yte), names};
  return inst;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    const std::string_view cell(line.data() + start,
                                (pos == std::string::npos ? line.size() : pos) - start);
    out.emplace_back(trim(cell));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawTable read_raw(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  RawTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " fields, header has " +
                               std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw std::runtime_error(path.string() + ": empty file");
  return t;
}

// Converts every cell; reports the first non-numeric column by name and the
// first row holding a missing or non-finite value by its data-row index.
MatrixXd to_numeric(const RawTable& t, const fs::path& path) {
  const Index n = static_cast<Index>(t.rows.size());
  const Index m = static_cast<Index>(t.header.size());
  MatrixXd v(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const std::string& cell = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      double x = 0.0;
      if (cell.empty()) {
        throw std::runtime_error(path.string() + ": row " + std::to_string(i) +
                                 " has a missing value in column '" +
                                 t.header[static_cast<std::size_t>(j)] + "'");
      }
      if (!parse_double(cell, x)) {
        throw std::runtime_error(path.string() + ": column '" +
                                 t.header[static_cast<std::size_t>(j)] +
                                 "' is not numeric (row " + std::to_string(i) + ": '" + cell +
                                 "')");
      }
      v(i, j) = x;
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (!v.row(i).allFinite()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(i) +
                               " contains a non-finite value");
    }
  }
  return v;
}

}  // namespace

CsvTable read_numeric_csv(const fs::path& path) {
  RawTable raw = read_raw(path);
  CsvTable t;
  t.values = to_numeric(raw, path);
  t.header = std::move(raw.header);
  return t;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const MatrixXd& values) {
  if (static_cast<Index>(header.size()) != values.cols()) {
    throw std::invalid_argument("write_csv: header/column count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  char buf[64];
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      // Shortest representation that round-trips exactly.
      const auto res = std::to_chars(buf, buf + sizeof buf, values(i, j));
      if (j) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void write_instance(const SyntheticInstance& inst, const ScenarioSpec& spec, const fs::path& dir) {
  fs::create_directories(dir);
  const Index p = inst.train.p();
  auto names = inst.train.feature_names;
  if (static_cast<Index>(names.size()) != p) names = column_names("x", p);
  write_csv(dir / "X_train.csv", names, inst.train.x);
  write_csv(dir / "y_train.csv", {"y"}, inst.train.y);
  write_csv(dir / "X_test.csv", names, inst.test.x);
  write_csv(dir / "y_test.csv", {"y"}, inst.test.y);
  write_csv(dir / "beta_star.csv", {"beta_star"}, inst.beta_star);

  json meta = {{"scenario", std::string(to_string(spec.scenario))},
               {"n_train", spec.n_train},
               {"n_test", spec.n_test},
               {"p", spec.p},
               {"sigma", spec.sigma},
               {"rho", spec.rho},
               {"sparsity", spec.sparsity},
               {"dense_magnitude", spec.dense_magnitude},
               {"sparse_magnitude", spec.sparse_magnitude},
               {"seed", spec.seed},
               {"support_star", inst.support_star}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

SyntheticInstance read_instance(const fs::path& dir) {
  auto load_xy = [&](const char* xf, const char* yf) {
    CsvTable x = read_numeric_csv(dir / xf);
    CsvTable y = read_numeric_csv(dir / yf);
    if (y.values.cols() != 1 || y.values.rows() != x.values.rows()) {
      throw std::runtime_error(std::string(yf) + " must be one column matching " + xf);
    }
    return Dataset{std::move(x.values), y.values.col(0), std::move(x.header)};
  };
  SyntheticInstance inst;
  inst.train = load_xy("X_train.csv", "y_train.csv");
  inst.train.validate();
  inst.test = load_xy("X_test.csv", "y_test.csv");
  if (inst.test.p() != inst.train.p()) throw std::runtime_error("train/test column mismatch");
  if (fs::exists(dir / "beta_star.csv")) {
    CsvTable b = read_numeric_csv(dir / "beta_star.csv");
    if (b.values.cols() != 1 || b.values.rows() != inst.train.p()) {
      throw std::runtime_error("beta_star.csv must hold one value per feature");
    }
    inst.beta_star = b.values.col(0);
    for (Index j = 0; j < inst.beta_star.size(); ++j) {
      if (inst.beta_star(j) != 0.0) inst.support_star.push_back(j);
    }
  }
  return inst;
}

std::pair<Dataset, Dataset> split_rows(const Dataset& d, std::uint64_t seed,
                                       double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must be in (0,1)");
  }
  const Index n = d.n();
  const Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test < 1 || n - n_test < 2) {
    throw std::invalid_argument("split: " + std::to_string(n) +
                                " rows are too few for test_fraction " +
                                std::to_string(test_fraction));
  }
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Index> test_rows(idx.begin(), idx.begin() + n_test);
  std::vector<Index> train_rows(idx.begin() + n_test, idx.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  auto take = [&](const std::vector<Index>& rows) {
    Dataset out{MatrixXd(static_cast<Index>(rows.size()), d.p()),
                VectorXd(static_cast<Index>(rows.size())), d.feature_names};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.x.row(static_cast<Index>(i)) = d.x.row(rows[i]);
      out.y(static_cast<Index>(i)) = d.y(rows[i]);
    }
    return out;
  };
  return {take(train_rows), take(test_rows)};
}

std::pair<Dataset, Dataset> load_csv(const fs::path& path, const std::string& target_column,
                                     std::uint64_t seed, double test_fraction) {
  RawTable raw = read_raw(path);
  const auto it = std::find(raw.header.begin(), raw.header.end(), target_column);
  if (it == raw.header.end()) {
    throw std::runtime_error(path.string() + ": target column '" + target_column +
                             "' not found");
  }
  if (raw.header.size() < 2) throw std::runtime_error(path.string() + ": no feature columns");
  const Index target = static_cast<Index>(it - raw.header.begin());
  const MatrixXd all = to_numeric(raw, path);

  Dataset d;
  d.y = all.col(target);
  d.x.resize(all.rows(), all.cols() - 1);
  for (Index j = 0, k = 0; j < all.cols(); ++j) {
    if (j == target) continue;
    d.x.col(k++) = all.col(j);
    d.feature_names.push_back(raw.header[static_cast<std::size_t>(j)]);
  }
  return split_rows(d, seed, test_fraction);
}

}  // namespace mlr
