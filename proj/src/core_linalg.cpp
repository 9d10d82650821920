#include "attnreg/core_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "attnreg/error.hpp"

namespace attnreg {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " has non-finite entries");
  }
}

}  // namespace

DesignMatrix::DesignMatrix(Matrix values, bool has_intercept)
    : values_(std::move(values)), has_intercept_(has_intercept) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorKind::InvalidArgument, "design matrix must be at least 1x1");
  }
  require_finite(values_, "design matrix");
}

DesignMatrix DesignMatrix::with_intercept(const Matrix& values) {
  Matrix out(values.rows(), values.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(values.cols()) = values;
  return DesignMatrix(std::move(out), true);
}

Vector OlsFit::predict(const DesignMatrix& x) const {
  if (x.cols() != coefficients.size()) {
    throw Error(ErrorKind::DimensionMismatch, "predict: column count differs from fit");
  }
  return x.values() * coefficients;
}

void symmetric_eigen(const Matrix& gram, double tol, Matrix& eigenvectors, Vector& eigenvalues) {
  if (gram.rows() != gram.cols() || gram.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "gram must be square and non-empty");
  }
  require_finite(gram, "gram");
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw Error(ErrorKind::NonSymmetric, "gram asymmetry exceeds tolerance");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularGram, "eigensolver did not converge");
  }
  const Eigen::Index p = gram.rows();

  // Solver returns ascending order; stable sort keeps solver order on ties.
  std::vector<Eigen::Index> order(static_cast<size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return solver.eigenvalues()(a) > solver.eigenvalues()(b);
  });

  eigenvectors.resize(p, p);
  eigenvalues.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::Index src = order[static_cast<size_t>(k)];
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    eigenvectors.col(k) = v;
    eigenvalues(k) = solver.eigenvalues()(src);
  }
}

SpectralEmbedding spectral_embedding(const Matrix& gram, double tol) {
  SpectralEmbedding out;
  symmetric_eigen(gram, tol, out.eigenvectors, out.eigenvalues);
  const double largest = out.eigenvalues(0);
  const double floor = tol * std::max(largest, 0.0);
  if (!(largest > 0.0) || out.eigenvalues.minCoeff() <= floor) {
    throw Error(ErrorKind::SingularGram, "gram is not strictly positive definite");
  }
  out.embedding = out.eigenvectors * out.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  return out;
}

FactorScores factor_scores(const DesignMatrix& x, const SpectralEmbedding& emb, ScoreOrigin origin) {
  if (x.cols() != emb.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "factor_scores: design has " +
                                                  std::to_string(x.cols()) + " columns, embedding " +
                                                  std::to_string(emb.dim()));
  }
  return {x.values() * emb.embedding, origin};
}

OlsFit ols_fit(const DesignMatrix& x_train, const Vector& y) {
  if (y.size() != x_train.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "ols_fit: y length differs from row count");
  }
  if (x_train.rows() < x_train.cols()) {
    throw Error(ErrorKind::SingularGram, "ols_fit: fewer observations than predictors");
  }
  OlsFit fit;
  fit.gram = x_train.gram();
  fit.embedding = spectral_embedding(fit.gram);
  // β = W W' X'y, i.e. U Λ^{-1} U' X'y.
  const Matrix& w = fit.embedding.embedding;
  fit.coefficients = w * (w.transpose() * (x_train.values().transpose() * y));
  return fit;
}

AttentionPrediction ols_predict_attention(const DesignMatrix& x_test, const DesignMatrix& x_train,
                                          const Vector& y) {
  if (x_test.cols() != x_train.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "query and key column counts differ");
  }
  if (y.size() != x_train.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "y length differs from training rows");
  }
  const SpectralEmbedding emb = spectral_embedding(x_train.gram());
  const FactorScores f_train = factor_scores(x_train, emb, ScoreOrigin::train);
  const FactorScores f_test = factor_scores(x_test, emb, ScoreOrigin::test);
  AttentionPrediction out;
  out.weights.values = f_test.values * f_train.values.transpose();
  out.predictions = out.weights.values * y;
  return out;
}

WeightDecomposition weight_decomposition(const Vector& f_query, const Vector& f_key) {
  if (f_query.size() != f_key.size()) {
    throw Error(ErrorKind::DimensionMismatch, "weight_decomposition: lengths differ");
  }
  const double weight = f_query.dot(f_key);
  const double scale = f_query.norm() * f_key.norm();
  const double cosine = scale > 0.0 ? weight / scale : 0.0;
  return {scale, cosine, weight};
}

}  // namespace attnreg
