#include "attnreg/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "attnreg/error.hpp"
#include "attnreg/rng.hpp"

namespace attnreg::workflow {

namespace {

constexpr int kArtifactVersion = 1;

std::string method_name(bench::MethodKind kind) {
  switch (kind) {
    case bench::MethodKind::ols: return "ols";
    case bench::MethodKind::ridge: return "ridge";
    case bench::MethodKind::pcr: return "pcr";
    case bench::MethodKind::attreg: return "attreg";
  }
  return "ols";
}

bool is_linear(const bench::MethodSpec& m) { return m.kind != bench::MethodKind::attreg; }

EmbeddingMatrix build_embedding(const bench::MethodSpec& m, const DesignMatrix& keys) {
  switch (m.kind) {
    case bench::MethodKind::ols: return ols_embedding(keys);
    case bench::MethodKind::ridge: return ridge_embedding(keys, m.lambda);
    case bench::MethodKind::pcr: return pcr_embedding(keys, m.components);
    case bench::MethodKind::attreg: break;
  }
  throw Error(ErrorKind::InvalidArgument, "attreg has no fixed embedding");
}

Matrix drop_columns(const csv::Table& table, const std::vector<std::string>& drop,
                    const std::string& also_drop = "") {
  std::vector<Eigen::Index> keep;
  for (size_t j = 0; j < table.header.size(); ++j) {
    const auto& name = table.header[j];
    if (name == also_drop) continue;
    if (std::find(drop.begin(), drop.end(), name) != drop.end()) continue;
    keep.push_back(static_cast<Eigen::Index>(j));
  }
  if (keep.empty()) throw Error(ErrorKind::ParseError, "no predictor columns left");
  Matrix out(table.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = table.values.col(keep[k]);
  return out;
}

Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Vector select_rows(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

void write_vector(std::ostream& out, const char* key, const Vector& v) {
  out << key << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << csv::format_double(v(i));
  out << '\n';
}

std::string next_word(std::istream& in) {
  std::string s;
  if (!(in >> s)) throw Error(ErrorKind::ParseError, "artifact truncated");
  return s;
}

void expect_word(std::istream& in, const std::string& want) {
  const std::string got = next_word(in);
  if (got != want) throw Error(ErrorKind::ParseError, "expected '" + want + "', found '" + got + "'");
}

double next_real(std::istream& in) {
  const std::string s = next_word(in);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad number '" + s + "'");
  return v;
}

long long next_int(std::istream& in) {
  const std::string s = next_word(in);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad integer '" + s + "'");
  return v;
}

Vector read_vector(std::istream& in, const char* key) {
  expect_word(in, key);
  const long long n = next_int(in);
  if (n < 0) throw Error(ErrorKind::ParseError, "negative length");
  Vector v(n);
  for (long long i = 0; i < n; ++i) v(i) = next_real(in);
  return v;
}

}  // namespace

DesignMatrix Artifact::prepare(const Matrix& raw) const {
  if (raw.cols() != static_cast<Eigen::Index>(predictors.size())) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(predictors.size()) +
                                                  " predictor columns");
  }
  Matrix x = raw;
  if (standardize) {
    x = (x.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
  }
  return intercept ? DesignMatrix::with_intercept(x) : DesignMatrix(std::move(x));
}

Vector Artifact::predict(const Matrix& raw) const {
  const DesignMatrix x = prepare(raw);
  if (attreg) return attnreg::predict(*attreg, x);
  return linear_attention_predict(x, *keys, key_y, *omega, ActivationKind::identity());
}

void save_artifact(std::ostream& out, const Artifact& a) {
  out << "attnreg-artifact " << kArtifactVersion << '\n';
  out << "method " << method_name(a.method.kind) << ' ' << csv::format_double(a.method.lambda)
      << ' ' << a.method.components << '\n';
  out << "target " << a.target << '\n';
  out << "predictors " << a.predictors.size();
  for (const auto& p : a.predictors) out << ' ' << p;
  out << '\n';
  out << "intercept " << (a.intercept ? 1 : 0) << '\n';
  out << "standardize " << (a.standardize ? 1 : 0) << '\n';
  if (a.standardize) {
    write_vector(out, "center", a.center);
    write_vector(out, "scale", a.scale);
  }
  if (a.attreg) {
    save_model(out, *a.attreg);
    return;
  }
  const Matrix& omega = a.omega->values;
  const Matrix& keys = a.keys->values();
  out << "omega " << omega.rows() << ' ' << a.omega->rank << '\n';
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    for (Eigen::Index j = 0; j < omega.cols(); ++j) {
      out << (j ? " " : "") << csv::format_double(omega(i, j));
    }
    out << '\n';
  }
  out << "keys " << keys.rows() << ' ' << keys.cols() << '\n';
  for (Eigen::Index i = 0; i < keys.rows(); ++i) {
    out << csv::format_double(a.key_y(i));
    for (Eigen::Index j = 0; j < keys.cols(); ++j) out << ' ' << csv::format_double(keys(i, j));
    out << '\n';
  }
  out << "end\n";
}

Artifact load_artifact(std::istream& in) {
  Artifact a;
  expect_word(in, "attnreg-artifact");
  if (next_int(in) != kArtifactVersion) throw Error(ErrorKind::ParseError, "unsupported artifact version");
  expect_word(in, "method");
  const std::string kind = next_word(in);
  const double lambda = next_real(in);
  const long long rank = next_int(in);
  a.method = bench::parse_method(kind, lambda, rank);
  expect_word(in, "target");
  a.target = next_word(in);
  expect_word(in, "predictors");
  const long long p = next_int(in);
  for (long long i = 0; i < p; ++i) a.predictors.push_back(next_word(in));
  expect_word(in, "intercept");
  a.intercept = next_int(in) != 0;
  expect_word(in, "standardize");
  a.standardize = next_int(in) != 0;
  if (a.standardize) {
    a.center = read_vector(in, "center");
    a.scale = read_vector(in, "scale");
  }
  if (a.method.kind == bench::MethodKind::attreg) {
    a.attreg = load_model(in);
    a.method.attreg = a.attreg->config;
    return a;
  }
  expect_word(in, "omega");
  const long long dim = next_int(in);
  const long long omega_rank = next_int(in);
  Matrix omega(dim, dim);
  for (long long i = 0; i < dim; ++i) {
    for (long long j = 0; j < dim; ++j) omega(i, j) = next_real(in);
  }
  EmbeddingMatrix e;
  e.values = std::move(omega);
  e.rank = omega_rank;
  e.kind = a.method.kind == bench::MethodKind::ols     ? EmbeddingKind::ols
           : a.method.kind == bench::MethodKind::ridge ? EmbeddingKind::ridge
                                                       : EmbeddingKind::pcr;
  e.lambda = a.method.lambda;
  e.components = a.method.components;
  a.omega = std::move(e);
  expect_word(in, "keys");
  const long long rows = next_int(in);
  const long long cols = next_int(in);
  Matrix keys(rows, cols);
  a.key_y.resize(rows);
  for (long long i = 0; i < rows; ++i) {
    a.key_y(i) = next_real(in);
    for (long long j = 0; j < cols; ++j) keys(i, j) = next_real(in);
  }
  a.keys = DesignMatrix(std::move(keys), a.intercept);
  expect_word(in, "end");
  return a;
}

std::string FitReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["in_sample_r2"] = in_sample_r2;
  j["test_r2"] = test_r2 ? nlohmann::json(*test_r2) : nlohmann::json(nullptr);
  if (diagnostics) {
    j["initial_loss"] = diagnostics->initial_loss;
    j["final_loss"] = diagnostics->final_loss;
    j["iterations"] = diagnostics->iterations;
    j["stop_reason"] = optim::to_string(diagnostics->stop_reason);
  }
  return j.dump(2);
}

std::pair<Artifact, FitReport> fit_csv(const FitOptions& options) {
  const csv::Table table = csv::read_file(options.input_path);
  const int t = table.column(options.target);
  if (t < 0) throw Error(ErrorKind::MissingTarget, "target column '" + options.target + "' not found");
  if (!(options.test_fraction >= 0.0 && options.test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "test fraction must be in [0, 1)");
  }

  Artifact a;
  a.method = options.method;
  a.target = options.target;
  for (const auto& name : table.header) {
    if (name != options.target &&
        std::find(options.drop.begin(), options.drop.end(), name) == options.drop.end()) {
      a.predictors.push_back(name);
    }
  }
  const Matrix raw = drop_columns(table, options.drop, options.target);
  const Vector y = table.values.col(t);
  const Eigen::Index n = raw.rows();

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto n_test = static_cast<Eigen::Index>(std::ceil(options.test_fraction * n));
  if (n_test > 0) {
    CounterRng rng(derive_seed({options.seed, 0x73706C6974ULL}));
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
  }
  const std::vector<Eigen::Index> train_rows(order.begin(), order.end() - n_test);
  const std::vector<Eigen::Index> test_rows(order.end() - n_test, order.end());
  if (train_rows.size() < 2) throw Error(ErrorKind::InvalidArgument, "training split too small");

  const Matrix x_train_raw = select_rows(raw, train_rows);
  const Vector y_train = select_rows(y, train_rows);

  a.standardize = options.standardize;
  if (a.standardize) {
    a.center = x_train_raw.colwise().mean().transpose();
    const Eigen::Index m = x_train_raw.rows();
    a.scale = ((x_train_raw.rowwise() - a.center.transpose()).colwise().squaredNorm() /
               static_cast<double>(m - 1))
                  .cwiseSqrt()
                  .transpose();
    for (Eigen::Index j = 0; j < a.scale.size(); ++j) {
      if (!(a.scale(j) > 0.0)) a.scale(j) = 1.0;
    }
  }
  a.intercept = is_linear(a.method) && options.intercept;

  const DesignMatrix x_train = a.prepare(x_train_raw);
  FitReport report;
  report.method = a.method.label();
  report.n_train = static_cast<int>(train_rows.size());
  report.n_test = static_cast<int>(test_rows.size());
  if (is_linear(a.method)) {
    a.omega = build_embedding(a.method, x_train);
    a.keys = x_train;
    a.key_y = y_train;
  } else {
    AttRegConfig cfg = a.method.attreg;
    cfg.seed = options.seed;
    a.attreg = fit(x_train, y_train, cfg);
    a.method.attreg = cfg;
    report.diagnostics = a.attreg->diagnostics;
  }
  report.in_sample_r2 = bench::out_of_sample_r2(y_train, a.predict(x_train_raw));
  if (!test_rows.empty()) {
    report.test_r2 =
        bench::out_of_sample_r2(select_rows(y, test_rows), a.predict(select_rows(raw, test_rows)));
  }
  return {std::move(a), report};
}

Matrix select_predictors(const csv::Table& table, const Artifact& artifact) {
  Matrix x(table.values.rows(), static_cast<Eigen::Index>(artifact.predictors.size()));
  for (size_t k = 0; k < artifact.predictors.size(); ++k) {
    const int j = table.column(artifact.predictors[k]);
    if (j < 0) {
      throw Error(ErrorKind::MissingTarget, "predictor column '" + artifact.predictors[k] +
                                                "' missing from input");
    }
    x.col(static_cast<Eigen::Index>(k)) = table.values.col(j);
  }
  return x;
}

WeightTable export_weights(const WeightOptions& options) {
  const csv::Table query_table = csv::read_file(options.query_path);
  WeightTable out;
  if (!options.model_path.empty()) {
    std::ifstream in(options.model_path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + options.model_path + "'");
    const Artifact a = load_artifact(in);
    const DesignMatrix queries = a.prepare(select_predictors(query_table, a));
    if (a.attreg) {
      const auto& model = *a.attreg;
      if (options.head < 0 || options.head >= static_cast<int>(model.heads.size())) {
        throw Error(ErrorKind::InvalidArgument, "head index out of range");
      }
      const EmbeddingMatrix omega =
          EmbeddingMatrix::learned(model.heads[static_cast<size_t>(options.head)].metric());
      out.weights = attention_weights(queries, model.train_x, omega, ActivationKind::softmax());
      out.normalized = true;
    } else {
      out.weights = attention_weights(queries, *a.keys, *a.omega, options.activation);
      out.normalized = options.activation.tag != ActivationTag::identity;
    }
    return out;
  }
  const csv::Table key_table = csv::read_file(options.key_path);
  const Matrix q_raw = drop_columns(query_table, options.drop);
  const Matrix k_raw = drop_columns(key_table, options.drop);
  if (q_raw.cols() != k_raw.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "query and key files have different column counts");
  }
  const DesignMatrix keys =
      options.intercept ? DesignMatrix::with_intercept(k_raw) : DesignMatrix(k_raw);
  const DesignMatrix queries =
      options.intercept ? DesignMatrix::with_intercept(q_raw) : DesignMatrix(q_raw);
  out.weights = attention_weights(queries, keys, build_embedding(options.method, keys),
                                  options.activation);
  out.normalized = options.activation.tag != ActivationTag::identity;
  return out;
}

void write_weights(std::ostream& out, const WeightTable& table) {
  const Matrix& w = table.weights;
  out << "query";
  for (Eigen::Index j = 0; j < w.cols(); ++j) out << ",k" << j;
  if (table.normalized) out << ",row_sum_ok";
  out << '\n';
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < w.cols(); ++j) out << ',' << csv::format_double(w(i, j));
    if (table.normalized) out << ',' << (std::abs(w.row(i).sum() - 1.0) <= 1e-8 ? 1 : 0);
    out << '\n';
  }
}

}  // namespace attnreg::workflow
