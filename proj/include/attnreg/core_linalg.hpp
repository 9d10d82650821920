#pragma once

#include <Eigen/Dense>

namespace attnreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense design matrix, rows are observations and columns predictors.
///
/// The library never appends a constant column on its own. `has_intercept`
/// only records what the caller put there (see `with_intercept`).
class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix values, bool has_intercept = false);

  /// Copy of `values` with a leading column of ones.
  static DesignMatrix with_intercept(const Matrix& values);

  const Matrix& values() const noexcept { return values_; }
  bool has_intercept() const noexcept { return has_intercept_; }
  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }

  Matrix gram() const { return values_.transpose() * values_; }

 private:
  Matrix values_;
  bool has_intercept_;
};

/// Eigenpairs of a positive definite gram G and the whitening map
/// W = U Λ^{-1/2}, so that W' G W = I.
struct SpectralEmbedding {
  Matrix eigenvectors;  // U, columns sign-normalized
  Vector eigenvalues;   // Λ, descending
  Matrix embedding;     // W

  Eigen::Index dim() const noexcept { return eigenvalues.size(); }
};

enum class ScoreOrigin { train, test };

struct FactorScores {
  Matrix values;
  ScoreOrigin origin;
};

struct ProximityWeights {
  Matrix values;  // rows = queries, cols = training observations
};

struct OlsFit {
  Vector coefficients;
  Matrix gram;
  SpectralEmbedding embedding;

  Vector predict(const DesignMatrix& x) const;
};

struct WeightDecomposition {
  double scale;
  double cosine;
  double weight;
};

/// Relative eigenvalue floor: anything at or below this times the largest
/// eigenvalue is treated as singular.
inline constexpr double kSingularTol = 1e-10;

/// Symmetric eigendecomposition, descending and sign-normalized so the
/// largest-magnitude entry of each eigenvector is positive.
/// Throws NonSymmetric or SingularGram.
SpectralEmbedding spectral_embedding(const Matrix& gram, double tol = kSingularTol);

/// Eigenpairs only, no positivity requirement beyond symmetry. Shared by the
/// ridge and PCR embeddings which tolerate a singular gram.
void symmetric_eigen(const Matrix& gram, double tol, Matrix& eigenvectors, Vector& eigenvalues);

FactorScores factor_scores(const DesignMatrix& x, const SpectralEmbedding& emb,
                           ScoreOrigin origin = ScoreOrigin::train);

OlsFit ols_fit(const DesignMatrix& x_train, const Vector& y);

struct AttentionPrediction {
  Vector predictions;
  ProximityWeights weights;
};

/// OLS predictions computed as F_test F_train' y.
AttentionPrediction ols_predict_attention(const DesignMatrix& x_test,
                                          const DesignMatrix& x_train, const Vector& y);

WeightDecomposition weight_decomposition(const Vector& f_query, const Vector& f_key);

}  // namespace attnreg
