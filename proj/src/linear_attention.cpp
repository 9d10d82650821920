#include "attnreg/linear_attention.hpp"

#include <cmath>

#include "attnreg/error.hpp"

namespace attnreg {

namespace {

Eigen::Index effective_rank(const Vector& eigenvalues) {
  const double largest = eigenvalues.cwiseAbs().maxCoeff();
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) > kSingularTol * largest) ++r;
  }
  return r;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

EmbeddingMatrix EmbeddingMatrix::zero(Eigen::Index p) {
  EmbeddingMatrix out;
  out.values = Matrix::Zero(p, p);
  out.rank = 0;
  out.kind = EmbeddingKind::learned;
  return out;
}

EmbeddingMatrix EmbeddingMatrix::learned(Matrix omega) {
  Matrix u;
  Vector lambda;
  symmetric_eigen(omega, 1e-10, u, lambda);
  const double largest = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -1e-10 * largest) {
    throw Error(ErrorKind::InvalidArgument, "embedding matrix is not positive semi-definite");
  }
  EmbeddingMatrix out;
  out.values = std::move(omega);
  out.rank = largest > 0.0 ? effective_rank(lambda) : 0;
  out.kind = EmbeddingKind::learned;
  return out;
}

EmbeddingMatrix ols_embedding(const DesignMatrix& x_train) {
  const SpectralEmbedding emb = spectral_embedding(x_train.gram());
  EmbeddingMatrix out;
  out.values = symmetrize(emb.embedding * emb.embedding.transpose());
  out.rank = emb.dim();
  out.kind = EmbeddingKind::ols;
  return out;
}

EmbeddingMatrix ridge_embedding(const DesignMatrix& x_train, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidArgument, "ridge penalty must be finite and >= 0");
  }
  EmbeddingMatrix out;
  if (lambda == 0.0) {
    out = ols_embedding(x_train);
  } else {
    Matrix u;
    Vector ev;
    symmetric_eigen(x_train.gram(), kSingularTol, u, ev);
    const Vector shrunk = (ev.array().max(0.0) + lambda).inverse().matrix();
    out.values = symmetrize(u * shrunk.asDiagonal() * u.transpose());
    out.rank = ev.size();
  }
  out.kind = EmbeddingKind::ridge;
  out.lambda = lambda;
  return out;
}

EmbeddingMatrix pcr_embedding(const DesignMatrix& x_train, Eigen::Index components) {
  const Eigen::Index p = x_train.cols();
  if (components < 1 || components > p) {
    throw Error(ErrorKind::RankOutOfRange,
                "component count " + std::to_string(components) + " outside [1, " +
                    std::to_string(p) + "]");
  }
  Matrix u;
  Vector ev;
  symmetric_eigen(x_train.gram(), kSingularTol, u, ev);
  const double largest = ev(0);
  if (!(largest > 0.0) || ev(components - 1) <= kSingularTol * largest) {
    throw Error(ErrorKind::SingularGram, "retained eigenvalue is not strictly positive");
  }
  const Matrix u_l = u.leftCols(components);
  const Vector inv = ev.head(components).cwiseInverse();
  EmbeddingMatrix out;
  out.values = symmetrize(u_l * inv.asDiagonal() * u_l.transpose());
  out.rank = components;
  out.kind = EmbeddingKind::pcr;
  out.components = components;
  return out;
}

void apply_activation_rows(Matrix& scores, const ActivationKind& g) {
  if (g.tag == ActivationTag::identity) return;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    switch (g.tag) {
      case ActivationTag::softmax: {
        const double top = row.maxCoeff();
        if (!std::isfinite(top)) {
          throw Error(ErrorKind::DegenerateRow, "softmax row " + std::to_string(i) +
                                                    " has no finite maximum");
        }
        row = (row.array() - top).exp().matrix();
        break;
      }
      case ActivationTag::normalized_relu:
        row = row.cwiseMax(0.0);
        break;
      case ActivationTag::normalized_elu: {
        const double nu = g.nu;
        row = row.unaryExpr([nu](double s) { return s > 0.0 ? s : nu * std::expm1(s); });
        break;
      }
      case ActivationTag::identity:
        break;
    }
    const double total = row.sum();
    if (!(std::abs(total) > kDegenerateRowTol)) {
      throw Error(ErrorKind::DegenerateRow,
                  "row " + std::to_string(i) + " normalizer is zero");
    }
    row /= total;
  }
}

Matrix attention_weights(const DesignMatrix& x_query, const DesignMatrix& x_key,
                         const EmbeddingMatrix& omega, const ActivationKind& g) {
  if (x_query.cols() != omega.dim() || x_key.cols() != omega.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "query/key columns must match embedding dimension");
  }
  if (!(g.temperature > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
  }
  Matrix scores = (x_query.values() * omega.values) * x_key.values().transpose();
  if (g.temperature != 1.0) scores /= g.temperature;
  apply_activation_rows(scores, g);
  return scores;
}

Vector linear_attention_predict(const DesignMatrix& x_query, const DesignMatrix& x_key,
                                const Vector& y, const EmbeddingMatrix& omega,
                                const ActivationKind& g) {
  if (y.size() != x_key.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "y length differs from key row count");
  }
  return attention_weights(x_query, x_key, omega, g) * y;
}

std::string to_string(ActivationTag tag) {
  switch (tag) {
    case ActivationTag::identity: return "identity";
    case ActivationTag::softmax: return "softmax";
    case ActivationTag::normalized_relu: return "relu";
    case ActivationTag::normalized_elu: return "elu";
  }
  return "identity";
}

ActivationTag parse_activation(const std::string& name) {
  if (name == "identity") return ActivationTag::identity;
  if (name == "softmax") return ActivationTag::softmax;
  if (name == "relu") return ActivationTag::normalized_relu;
  if (name == "elu") return ActivationTag::normalized_elu;
  throw Error(ErrorKind::InvalidArgument, "unknown activation '" + name + "'");
}

}  // namespace attnreg
