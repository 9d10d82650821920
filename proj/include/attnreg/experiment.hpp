#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attnreg/attreg.hpp"
#include "attnreg/core_linalg.hpp"
#include "attnreg/dgp.hpp"

namespace attnreg::bench {

enum class MethodKind { ols, ridge, pcr, attreg };

/// One estimator in the comparison. Linear methods get a constant column
/// prepended; attreg sees the raw predictors.
struct MethodSpec {
  MethodKind kind = MethodKind::ols;
  double lambda = 1.0;          // ridge
  Eigen::Index components = 1;  // pcr
  AttRegConfig attreg;          // attreg; seed is overridden per cell

  /// "ols", "ridge(0.5)", "pcr(3)", "attreg"
  std::string label() const;
};

/// Accepts "ols", "ridge", "ridge:0.5", "pcr:3", "attreg". Defaults for the
/// bare forms come from `lambda`, `rank` and `attreg`.
MethodSpec parse_method(const std::string& text, double lambda = 1.0, Eigen::Index rank = 2,
                        const AttRegConfig& attreg = {});

/// Trains the method and returns test-set predictions.
Vector fit_and_predict(const MethodSpec& method, const Matrix& x_train, const Vector& y_train,
                       const Matrix& x_test, std::uint64_t seed);

struct ExperimentConfig {
  std::vector<dgp::DgpKind> dgps;
  std::vector<int> sample_sizes;
  std::vector<double> snrs;
  int replications = 10;
  int test_size = 1000;
  std::vector<MethodSpec> methods;
  std::uint64_t base_seed = 20250101;
  int threads = 1;
  std::string output_path = "bench_out";

  void validate() const;

  /// N in {500, 1000}, SNR in {0.5, 1, 2, 3}, 10 replications, all DGPs.
  static ExperimentConfig desk_scale();
  /// Adds N = 2500 and 5000.
  static ExperimentConfig full_grid();
};

struct ExperimentRecord {
  dgp::DgpKind dgp = dgp::DgpKind::linear;
  int n = 0;
  double snr = 0.0;
  int replication = 0;
  std::string method;
  double r2_test = 0.0;
  double r2_vs_signal = 0.0;
  double fit_seconds = 0.0;
  std::string error;  // empty on success
};

struct SummaryEntry {
  std::string dgp;  // "overall" aggregates every DGP
  std::string method;
  double mean = 0.0;
  double sd = 0.0;
  int conditions = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::vector<SummaryEntry> summary;

  /// Mean r2_test over records matching the filters (empty = any).
  double mean_r2(const std::string& method, const std::vector<dgp::DgpKind>& dgps = {},
                 const std::vector<int>& ns = {}, const std::vector<double>& snrs = {}) const;
};

/// Degenerate when the target's sum of squares about its mean is below this.
inline constexpr double kDegenerateTargetTol = 1e-24;

/// 1 − SSE/SST with SST about the mean of `y_true`. Throws DegenerateTarget.
double out_of_sample_r2(const Vector& y_true, const Vector& y_pred);

std::uint64_t train_seed(std::uint64_t base, dgp::DgpKind kind, int n, double snr, int rep);
std::uint64_t test_seed(std::uint64_t base, dgp::DgpKind kind, double snr);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes records.csv, summary.json and plot_data.csv (deterministic) plus
/// timings.csv (wall clock, not reproducible) into `dir`.
void write_results(const ExperimentResult& result, const ExperimentConfig& config,
                   const std::string& dir);

/// Flat `key = value` text; '#' starts a comment; list values are
/// comma-separated. Keys mirror the long CLI flags without dashes.
std::map<std::string, std::string> read_key_values(const std::string& path);

}  // namespace attnreg::bench
