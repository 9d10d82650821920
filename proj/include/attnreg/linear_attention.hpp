#pragma once

#include <string>

#include "attnreg/core_linalg.hpp"

namespace attnreg {

enum class EmbeddingKind { ols, ridge, pcr, learned };

/// Symmetric PSD metric Ω used to compare queries with keys.
struct EmbeddingMatrix {
  Matrix values;
  Eigen::Index rank = 0;
  EmbeddingKind kind = EmbeddingKind::ols;
  double lambda = 0.0;        // ridge only
  Eigen::Index components = 0;  // pcr only

  Eigen::Index dim() const noexcept { return values.rows(); }

  static EmbeddingMatrix zero(Eigen::Index p);
  /// Wraps an arbitrary symmetric PSD matrix; throws NonSymmetric otherwise.
  static EmbeddingMatrix learned(Matrix omega);
};

enum class ActivationTag { identity, softmax, normalized_relu, normalized_elu };

struct ActivationKind {
  ActivationTag tag = ActivationTag::identity;
  double temperature = 1.0;
  double nu = 1.0;  // normalized_elu only

  static ActivationKind identity() { return {}; }
  static ActivationKind softmax(double temperature = 1.0) {
    return {ActivationTag::softmax, temperature, 1.0};
  }
  static ActivationKind normalized_relu(double temperature = 1.0) {
    return {ActivationTag::normalized_relu, temperature, 1.0};
  }
  static ActivationKind normalized_elu(double nu = 1.0, double temperature = 1.0) {
    return {ActivationTag::normalized_elu, temperature, nu};
  }
};

/// Row normalizers at or below this magnitude raise DegenerateRow.
inline constexpr double kDegenerateRowTol = 1e-300;

EmbeddingMatrix ols_embedding(const DesignMatrix& x_train);

/// Ω = U (Λ + λI)^{-1} U'.
EmbeddingMatrix ridge_embedding(const DesignMatrix& x_train, double lambda);

/// Ω = U_L Λ_L^{-1} U_L' keeping the top `components` eigenpairs.
EmbeddingMatrix pcr_embedding(const DesignMatrix& x_train, Eigen::Index components);

/// Applies the activation in place, row by row, to a score matrix that has
/// already been divided by the temperature.
void apply_activation_rows(Matrix& scores, const ActivationKind& g);

Matrix attention_weights(const DesignMatrix& x_query, const DesignMatrix& x_key,
                         const EmbeddingMatrix& omega, const ActivationKind& g);

Vector linear_attention_predict(const DesignMatrix& x_query, const DesignMatrix& x_key,
                                const Vector& y, const EmbeddingMatrix& omega,
                                const ActivationKind& g);

std::string to_string(ActivationTag tag);
ActivationTag parse_activation(const std::string& name);

}  // namespace attnreg
