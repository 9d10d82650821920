#pragma once

#include "attnreg/core_linalg.hpp"

namespace attnreg::ts {

/// Hat matrix of a lag-1 regression, read as self-attention: row t weights
/// the lagged sources y_1..y_{N-1} when fitting y_{t+1}.
struct SeriesAttention {
  Matrix weights;
  int lag = 1;
};

struct Ar1Attention {
  SeriesAttention attention;
  Vector fitted;  // length N-1, fits of y_2..y_N
};

struct VarAttention {
  Matrix hat;     // (N-1) x (N-1)
  Matrix fitted;  // (N-1) x M
};

struct LagOptions {
  bool include_intercept = false;
};

/// Lag sums of squares below this are degenerate.
inline constexpr double kDegenerateLagTol = 1e-24;
/// Masked weight sums at or below this magnitude are degenerate.
inline constexpr double kDegenerateMaskTol = 1e-12;

/// Throws DegenerateLag when the lagged series has (numerically) zero norm.
Ar1Attention ar1_attention(const Vector& y, LagOptions options = {});

/// ŷ_t = Σ_{τ≤t} a_τ y_τ / Σ_{τ≤t} a_τ with 1-based t. Throws DegenerateMask.
double masked_prediction(const Vector& weights, const Vector& y, int t);

/// Renormalized weights over sources 1..t (zeros after t).
Vector masked_weights(const Vector& weights, int t);

/// VAR(1) fitted values as A·Y_{+} with A the lagged hat matrix. Throws SingularGram.
VarAttention var_self_attention(const Matrix& y, LagOptions options = {});

/// Relative Frobenius gap between the exact lagged-gram hat matrix and the
/// variant that uses the full-sample gram Y'Y.
double full_gram_approximation_gap(const Matrix& y);

}  // namespace attnreg::ts
