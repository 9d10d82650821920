#include "attnreg/timeseries.hpp"

#include <cmath>
#include <string>

#include "attnreg/error.hpp"

namespace attnreg::ts {

namespace {

Matrix lagged_regressors(const Matrix& y, bool intercept) {
  const Eigen::Index rows = y.rows() - 1;
  Matrix lag(rows, y.cols() + (intercept ? 1 : 0));
  if (intercept) {
    lag.col(0).setOnes();
    lag.rightCols(y.cols()) = y.topRows(rows);
  } else {
    lag = y.topRows(rows);
  }
  return lag;
}

// Z (Z'Z)^{-1} Z' through a Cholesky solve.
Matrix projection(const Matrix& z) {
  const Matrix gram = z.transpose() * z;
  Eigen::LDLT<Matrix> ldlt(gram);
  const double largest = gram.diagonal().cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * largest) {
    throw Error(ErrorKind::SingularGram, "lagged regressors are not full column rank");
  }
  Matrix hat = z * ldlt.solve(z.transpose());
  return 0.5 * (hat + hat.transpose());
}

}  // namespace

Ar1Attention ar1_attention(const Vector& y, LagOptions options) {
  if (y.size() < 3) throw Error(ErrorKind::InvalidArgument, "AR(1) attention needs N >= 3");
  const Eigen::Index rows = y.size() - 1;
  if (y.head(rows).squaredNorm() < kDegenerateLagTol) {
    throw Error(ErrorKind::DegenerateLag, "lagged series has zero norm");
  }
  Ar1Attention out;
  if (options.include_intercept) {
    out.attention.weights = projection(lagged_regressors(y, true));
  } else {
    const Vector lag = y.head(rows);
    out.attention.weights = lag * lag.transpose() / lag.squaredNorm();
  }
  out.fitted = out.attention.weights * y.tail(rows);
  return out;
}

Vector masked_weights(const Vector& weights, int t) {
  if (t < 1 || t > weights.size()) {
    throw Error(ErrorKind::InvalidArgument, "mask index " + std::to_string(t) + " out of range");
  }
  const double total = weights.head(t).sum();
  if (!(std::abs(total) > kDegenerateMaskTol)) {
    throw Error(ErrorKind::DegenerateMask, "masked weights cancel at t = " + std::to_string(t));
  }
  Vector out = Vector::Zero(weights.size());
  out.head(t) = weights.head(t) / total;
  return out;
}

double masked_prediction(const Vector& weights, const Vector& y, int t) {
  if (weights.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "weights and sources differ in length");
  }
  if (t == 1) {
    if (!(std::abs(weights(0)) > kDegenerateMaskTol)) {
      throw Error(ErrorKind::DegenerateMask, "single admissible source has zero weight");
    }
    return y(0);
  }
  return masked_weights(weights, t).head(t).dot(y.head(t));
}

VarAttention var_self_attention(const Matrix& y, LagOptions options) {
  if (y.rows() < 2 || y.cols() < 1) throw Error(ErrorKind::InvalidArgument, "empty panel");
  const Matrix lag = lagged_regressors(y, options.include_intercept);
  if (lag.rows() < lag.cols()) {
    throw Error(ErrorKind::SingularGram, "fewer lagged observations than regressors");
  }
  VarAttention out;
  out.hat = projection(lag);
  out.fitted = out.hat * y.bottomRows(y.rows() - 1);
  return out;
}

double full_gram_approximation_gap(const Matrix& y) {
  const Matrix lag = lagged_regressors(y, false);
  const Matrix exact = projection(lag);
  const Matrix full_gram = y.transpose() * y;
  const Matrix approx = lag * full_gram.ldlt().solve(lag.transpose());
  return (exact - approx).norm() / exact.norm();
}

}  // namespace attnreg::ts
