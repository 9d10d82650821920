#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "attnreg/attreg.hpp"
#include "attnreg/csv.hpp"
#include "attnreg/experiment.hpp"
#include "attnreg/linear_attention.hpp"

namespace attnreg::workflow {

/// A fitted estimator plus the column bookkeeping needed to apply it to a
/// new CSV file.
struct Artifact {
  bench::MethodSpec method;
  std::string target;
  std::vector<std::string> predictors;
  bool intercept = false;
  bool standardize = false;
  Vector center;  // per predictor, empty unless standardize
  Vector scale;

  // Linear methods: metric over the (possibly intercept-augmented) design
  // plus the keys and outcomes it attends to.
  std::optional<EmbeddingMatrix> omega;
  std::optional<DesignMatrix> keys;
  Vector key_y;

  std::optional<MultiHeadModel> attreg;

  /// Applies the stored standardization and intercept to raw predictors.
  DesignMatrix prepare(const Matrix& raw) const;
  Vector predict(const Matrix& raw) const;
};

void save_artifact(std::ostream& out, const Artifact& artifact);
Artifact load_artifact(std::istream& in);

struct FitOptions {
  std::string input_path;
  std::string target = "y";
  std::vector<std::string> drop;  // columns ignored entirely
  bench::MethodSpec method;
  double test_fraction = 0.0;
  bool standardize = false;
  bool intercept = true;  // linear methods only
  std::uint64_t seed = 0;
};

struct FitReport {
  std::string method;
  int n_train = 0;
  int n_test = 0;
  double in_sample_r2 = 0.0;
  std::optional<double> test_r2;
  std::optional<FitDiagnostics> diagnostics;

  std::string to_json() const;
};

/// Fits on the whole file, or on a seeded random split when
/// test_fraction > 0.
std::pair<Artifact, FitReport> fit_csv(const FitOptions& options);

/// Selects the artifact's predictor columns from a CSV file by name.
Matrix select_predictors(const csv::Table& table, const Artifact& artifact);

struct WeightOptions {
  std::string query_path;
  std::string key_path;  // ignored for attreg artifacts (keys are the training set)
  std::string model_path;  // optional; otherwise `method` builds Ω from the keys
  bench::MethodSpec method;
  ActivationKind activation;
  std::vector<std::string> drop;
  bool intercept = true;
  int head = 0;  // attreg: which head, 0-based
};

struct WeightTable {
  Matrix weights;  // queries x keys
  bool normalized = false;
};

WeightTable export_weights(const WeightOptions& options);

/// Header "query,k0,...,k{N-1}" plus a trailing "row_sum_ok" column (1/0,
/// |sum − 1| ≤ 1e-8) for normalized weights.
void write_weights(std::ostream& out, const WeightTable& table);

}  // namespace attnreg::workflow
