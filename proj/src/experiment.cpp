#include "attnreg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "attnreg/csv.hpp"
#include "attnreg/error.hpp"
#include "attnreg/linear_attention.hpp"
#include "attnreg/rng.hpp"

namespace attnreg::bench {

std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::ols: return "ols";
    case MethodKind::ridge: return "ridge(" + csv::format_double(lambda) + ")";
    case MethodKind::pcr: return "pcr(" + std::to_string(components) + ")";
    case MethodKind::attreg: return "attreg";
  }
  return "ols";
}

MethodSpec parse_method(const std::string& text, double lambda, Eigen::Index rank,
                        const AttRegConfig& attreg) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  MethodSpec m;
  m.lambda = lambda;
  m.components = rank;
  m.attreg = attreg;
  try {
    if (name == "ols") {
      m.kind = MethodKind::ols;
    } else if (name == "ridge") {
      m.kind = MethodKind::ridge;
      if (!arg.empty()) {
        size_t used = 0;
        m.lambda = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      }
    } else if (name == "pcr") {
      m.kind = MethodKind::pcr;
      if (!arg.empty()) {
        size_t used = 0;
        m.components = std::stol(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      }
    } else if (name == "attreg") {
      m.kind = MethodKind::attreg;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown method '" + text + "'");
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidArgument, "bad method argument in '" + text + "'");
  }
  if ((m.kind == MethodKind::ols || m.kind == MethodKind::attreg) && !arg.empty()) {
    throw Error(ErrorKind::InvalidArgument, name + " takes no argument");
  }
  if (m.kind == MethodKind::ridge && !(std::isfinite(m.lambda) && m.lambda >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "ridge penalty must be finite and >= 0");
  }
  if (m.kind == MethodKind::pcr && m.components < 1) {
    throw Error(ErrorKind::InvalidArgument, "pcr needs at least one component");
  }
  return m;
}

Vector fit_and_predict(const MethodSpec& method, const Matrix& x_train, const Vector& y_train,
                       const Matrix& x_test, std::uint64_t seed) {
  if (method.kind == MethodKind::attreg) {
    AttRegConfig cfg = method.attreg;
    cfg.seed = seed;
    const MultiHeadModel model = fit(DesignMatrix(x_train), y_train, cfg);
    return predict(model, DesignMatrix(x_test));
  }
  const DesignMatrix keys = DesignMatrix::with_intercept(x_train);
  const DesignMatrix queries = DesignMatrix::with_intercept(x_test);
  EmbeddingMatrix omega;
  switch (method.kind) {
    case MethodKind::ols: omega = ols_embedding(keys); break;
    case MethodKind::ridge: omega = ridge_embedding(keys, method.lambda); break;
    case MethodKind::pcr: omega = pcr_embedding(keys, method.components); break;
    case MethodKind::attreg: break;
  }
  return linear_attention_predict(queries, keys, y_train, omega, ActivationKind::identity());
}

void ExperimentConfig::validate() const {
  if (dgps.empty() || sample_sizes.empty() || snrs.empty() || methods.empty()) {
    throw Error(ErrorKind::InvalidArgument, "experiment grid lists must be non-empty");
  }
  if (replications < 1) throw Error(ErrorKind::InvalidArgument, "replications must be >= 1");
  if (test_size < 2) throw Error(ErrorKind::InvalidArgument, "test size must be >= 2");
  if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
  for (int n : sample_sizes) {
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "sample sizes must be >= 2");
  }
  for (double s : snrs) {
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "SNR values must be positive");
  }
}

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig c;
  c.dgps.assign(dgp::kAllKinds.begin(), dgp::kAllKinds.end());
  c.sample_sizes = {500, 1000};
  c.snrs = {0.5, 1.0, 2.0, 3.0};
  c.replications = 10;
  c.test_size = 1000;
  c.methods = {parse_method("ols"), parse_method("attreg")};
  return c;
}

ExperimentConfig ExperimentConfig::full_grid() {
  ExperimentConfig c = desk_scale();
  c.sample_sizes = {500, 1000, 2500, 5000};
  return c;
}

double out_of_sample_r2(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::DimensionMismatch, "R^2 inputs differ in length");
  }
  if (y_true.size() < 2) throw Error(ErrorKind::InvalidArgument, "R^2 needs at least 2 values");
  const double sst = (y_true.array() - y_true.mean()).square().sum();
  if (!(sst > kDegenerateTargetTol)) {
    throw Error(ErrorKind::DegenerateTarget, "target has no variance");
  }
  return 1.0 - (y_true - y_pred).squaredNorm() / sst;
}

std::uint64_t train_seed(std::uint64_t base, dgp::DgpKind kind, int n, double snr, int rep) {
  return derive_seed({base, 0x7261696EULL, static_cast<std::uint64_t>(kind),
                      static_cast<std::uint64_t>(n), std::bit_cast<std::uint64_t>(snr),
                      static_cast<std::uint64_t>(rep)});
}

std::uint64_t test_seed(std::uint64_t base, dgp::DgpKind kind, double snr) {
  return derive_seed({base, 0x74657374ULL, static_cast<std::uint64_t>(kind),
                      std::bit_cast<std::uint64_t>(snr)});
}

namespace {

struct Task {
  size_t dgp_index;
  size_t snr_index;
  int n;
  int rep;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const size_t n_methods = config.methods.size();

  // Fixed test draws per (dgp, snr), shared across N and replications.
  std::vector<std::vector<dgp::TestDraw>> tests(config.dgps.size());
  for (size_t d = 0; d < config.dgps.size(); ++d) {
    for (double snr : config.snrs) {
      tests[d].push_back(dgp::generate_test({config.dgps[d]}, config.test_size,
                                            test_seed(config.base_seed, config.dgps[d], snr)));
    }
  }

  std::vector<Task> tasks;
  for (size_t d = 0; d < config.dgps.size(); ++d) {
    for (int n : config.sample_sizes) {
      for (size_t s = 0; s < config.snrs.size(); ++s) {
        for (int rep = 0; rep < config.replications; ++rep) tasks.push_back({d, s, n, rep});
      }
    }
  }

  ExperimentResult result;
  result.records.resize(tasks.size() * n_methods);

  auto run_task = [&](size_t t) {
    const Task& task = tasks[t];
    const dgp::DgpKind kind = config.dgps[task.dgp_index];
    const double snr = config.snrs[task.snr_index];
    const std::uint64_t seed = train_seed(config.base_seed, kind, task.n, snr, task.rep);
    const dgp::TestDraw& test = tests[task.dgp_index][task.snr_index];

    std::string data_error;
    dgp::SimulatedDataset train;
    Vector y_test;
    try {
      train = dgp::generate({kind}, task.n, snr, seed);
      y_test = test.noisy_outcomes(train.noise_variance);
    } catch (const std::exception& e) {
      data_error = e.what();
    }

    for (size_t k = 0; k < n_methods; ++k) {
      ExperimentRecord& rec = result.records[t * n_methods + k];
      rec.dgp = kind;
      rec.n = task.n;
      rec.snr = snr;
      rec.replication = task.rep;
      rec.method = config.methods[k].label();
      rec.r2_test = rec.r2_vs_signal = std::numeric_limits<double>::quiet_NaN();
      if (!data_error.empty()) {
        rec.error = data_error;
        continue;
      }
      const auto start = std::chrono::steady_clock::now();
      try {
        const Vector pred = fit_and_predict(config.methods[k], train.x, train.y, test.x,
                                            derive_seed({seed, 0x6D6F64ULL, k}));
        rec.r2_test = out_of_sample_r2(y_test, pred);
        rec.r2_vs_signal = out_of_sample_r2(test.signal, pred);
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      rec.fit_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  const size_t width = std::min<size_t>(static_cast<size_t>(config.threads), tasks.size());
  if (width <= 1) {
    for (size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < width; ++w) {
      pool.emplace_back([&] {
        for (size_t t = next++; t < tasks.size(); t = next++) run_task(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Summary: average replications within each (N, SNR) condition, then
  // mean and sample sd across conditions.
  auto summarize = [&](const std::string& dgp_label, const std::vector<dgp::DgpKind>& kinds,
                       const std::string& method) {
    std::map<std::tuple<int, int, double>, std::pair<double, int>> cells;
    for (const auto& r : result.records) {
      if (r.method != method || !r.error.empty() || !std::isfinite(r.r2_test)) continue;
      if (std::find(kinds.begin(), kinds.end(), r.dgp) == kinds.end()) continue;
      auto& cell = cells[{static_cast<int>(r.dgp), r.n, r.snr}];
      cell.first += r.r2_test;
      cell.second += 1;
    }
    SummaryEntry e{dgp_label, method, 0.0, 0.0, static_cast<int>(cells.size())};
    if (cells.empty()) {
      e.mean = e.sd = std::numeric_limits<double>::quiet_NaN();
      return e;
    }
    std::vector<double> means;
    for (const auto& [key, acc] : cells) means.push_back(acc.first / acc.second);
    double sum = 0.0;
    for (double v : means) sum += v;
    e.mean = sum / static_cast<double>(means.size());
    double ss = 0.0;
    for (double v : means) ss += (v - e.mean) * (v - e.mean);
    e.sd = means.size() > 1 ? std::sqrt(ss / static_cast<double>(means.size() - 1)) : 0.0;
    return e;
  };
  for (const auto& m : config.methods) {
    for (dgp::DgpKind kind : config.dgps) {
      result.summary.push_back(summarize(std::string(dgp::to_string(kind)), {kind}, m.label()));
    }
    result.summary.push_back(summarize("overall", config.dgps, m.label()));
  }
  return result;
}

double ExperimentResult::mean_r2(const std::string& method, const std::vector<dgp::DgpKind>& dgps,
                                 const std::vector<int>& ns, const std::vector<double>& snrs) const {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.method != method || !r.error.empty()) continue;
    if (!dgps.empty() && std::find(dgps.begin(), dgps.end(), r.dgp) == dgps.end()) continue;
    if (!ns.empty() && std::find(ns.begin(), ns.end(), r.n) == ns.end()) continue;
    if (!snrs.empty() && std::find(snrs.begin(), snrs.end(), r.snr) == snrs.end()) continue;
    sum += r.r2_test;
    ++count;
  }
  return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_results(const ExperimentResult& result, const ExperimentConfig& config,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  using csv::format_double;
  {
    auto out = open_out(fs::path(dir) / "records.csv");
    out << "dgp,n,snr,replication,method,r2_test,r2_vs_signal,error\n";
    for (const auto& r : result.records) {
      out << dgp::to_string(r.dgp) << ',' << r.n << ',' << format_double(r.snr) << ','
          << r.replication << ',' << r.method << ',' << format_double(r.r2_test) << ','
          << format_double(r.r2_vs_signal) << ',' << (r.error.empty() ? "" : quote(r.error))
          << '\n';
    }
  }
  {
    auto out = open_out(fs::path(dir) / "timings.csv");
    out << "dgp,n,snr,replication,method,fit_seconds\n";
    for (const auto& r : result.records) {
      out << dgp::to_string(r.dgp) << ',' << r.n << ',' << format_double(r.snr) << ','
          << r.replication << ',' << r.method << ',' << format_double(r.fit_seconds) << '\n';
    }
  }
  {
    auto out = open_out(fs::path(dir) / "plot_data.csv");
    out << "dgp,method,mean_r2,sd_r2,conditions\n";
    for (const auto& e : result.summary) {
      out << e.dgp << ',' << e.method << ',' << format_double(e.mean) << ','
          << format_double(e.sd) << ',' << e.conditions << '\n';
    }
  }
  {
    nlohmann::json j;
    j["base_seed"] = config.base_seed;
    j["replications"] = config.replications;
    j["test_size"] = config.test_size;
    j["sample_sizes"] = config.sample_sizes;
    j["snrs"] = config.snrs;
    for (auto kind : config.dgps) j["dgps"].push_back(std::string(dgp::to_string(kind)));
    for (const auto& m : config.methods) j["methods"].push_back(m.label());
    j["records"] = result.records.size();
    size_t failures = 0;
    for (const auto& r : result.records) failures += r.error.empty() ? 0 : 1;
    j["failed_records"] = failures;
    for (const auto& e : result.summary) {
      nlohmann::json s;
      s["dgp"] = e.dgp;
      s["method"] = e.method;
      s["conditions"] = e.conditions;
      s["mean_r2"] = std::isfinite(e.mean) ? nlohmann::json(e.mean) : nlohmann::json(nullptr);
      s["sd_r2"] = std::isfinite(e.sd) ? nlohmann::json(e.sd) : nlohmann::json(nullptr);
      j["summary"].push_back(s);
    }
    auto out = open_out(fs::path(dir) / "summary.json");
    out << j.dump(2) << '\n';
  }
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace attnreg::bench
