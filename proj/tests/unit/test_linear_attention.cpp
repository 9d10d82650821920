#include <doctest.h>

#include "attnreg/linear_attention.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace attnreg;

namespace {

Matrix diag_gram_design() {
  // X'X = diag(4, 1)
  Matrix x = Matrix::Zero(2, 2);
  x(0, 0) = 2.0;
  x(1, 1) = 1.0;
  return x;
}

// PCA on the uncentered design, then OLS on the first L scores.
Vector pcr_pipeline(const Matrix& x, const Vector& y, const Matrix& q, Eigen::Index l) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinV);
  const Matrix v = svd.matrixV().leftCols(l);
  const Matrix scores = x * v;
  const Vector gamma = scores.colPivHouseholderQr().solve(y);
  return q * v * gamma;
}

}  // namespace

TEST_CASE("ridge_embedding") {
  SUBCASE("lambda = 0 is the OLS inverse") {
    CounterRng rng(1);
    const Matrix x = oracle::random_matrix(rng, 15, 3);
    const auto omega = ridge_embedding(DesignMatrix(x), 0.0);
    const Matrix inv = (x.transpose() * x).inverse();
    CHECK(oracle::rel_err(omega.values, inv) < 1e-10);
    CHECK(omega.kind == EmbeddingKind::ridge);
  }
  SUBCASE("diag(4,1) with lambda = 1") {
    const auto omega = ridge_embedding(DesignMatrix(diag_gram_design()), 1.0);
    CHECK(omega.values(0, 0) == doctest::Approx(0.2));
    CHECK(omega.values(1, 1) == doctest::Approx(0.5));
    CHECK(std::abs(omega.values(0, 1)) < 1e-15);
  }
  SUBCASE("matches a direct solve of (X'X + lambda I) Z = I") {
    CounterRng rng(2);
    const Matrix x = oracle::random_matrix(rng, 20, 3);
    const Matrix a = x.transpose() * x + 0.5 * Matrix::Identity(3, 3);
    const Matrix direct = a.partialPivLu().solve(Matrix::Identity(3, 3));
    CHECK(oracle::rel_err(ridge_embedding(DesignMatrix(x), 0.5).values, direct) < 1e-10);
  }
  SUBCASE("singular gram is fine with lambda > 0 and fails at 0") {
    const DesignMatrix x(Matrix::Ones(4, 2));
    CHECK(ridge_embedding(x, 0.1).values.allFinite());
    CHECK(kind_of([&] { ridge_embedding(x, 0.0); }) == ErrorKind::SingularGram);
    CHECK(kind_of([&] { ridge_embedding(x, -1.0); }) == ErrorKind::InvalidArgument);
  }
  SUBCASE("largest eigenvalue shrinks as lambda grows") {
    CounterRng rng(3);
    const DesignMatrix x(oracle::random_matrix(rng, 30, 4));
    double previous = INFINITY;
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double top =
          Eigen::SelfAdjointEigenSolver<Matrix>(ridge_embedding(x, lambda).values).eigenvalues().maxCoeff();
      CHECK(top <= previous);
      previous = top;
    }
  }
}

TEST_CASE("pcr_embedding") {
  SUBCASE("L = P is the OLS inverse") {
    CounterRng rng(4);
    const Matrix x = oracle::random_matrix(rng, 25, 4);
    CHECK(oracle::rel_err(pcr_embedding(DesignMatrix(x), 4).values, (x.transpose() * x).inverse()) <
          1e-10);
  }
  SUBCASE("diag(4,1) truncated to one component") {
    const auto omega = pcr_embedding(DesignMatrix(diag_gram_design()), 1);
    CHECK(omega.values(0, 0) == doctest::Approx(0.25));
    CHECK(std::abs(omega.values(1, 1)) < 1e-15);
    CHECK(omega.rank == 1);
  }
  SUBCASE("attention with Omega_L equals PCA-then-OLS") {
    CounterRng rng(5);
    const Matrix x = oracle::random_matrix(rng, 40, 5);
    const Matrix q = oracle::random_matrix(rng, 6, 5);
    const Vector y = oracle::random_vector(rng, 40);
    const Vector got = linear_attention_predict(DesignMatrix(q), DesignMatrix(x), y,
                                                pcr_embedding(DesignMatrix(x), 2),
                                                ActivationKind::identity());
    CHECK(oracle::rel_err(got, pcr_pipeline(x, y, q, 2)) < 1e-8);
  }
  SUBCASE("rank and Frobenius distance to OLS") {
    CounterRng rng(6);
    const DesignMatrix x(oracle::random_matrix(rng, 30, 5));
    const Matrix ols = ols_embedding(x).values;
    double previous = INFINITY;
    for (Eigen::Index l = 1; l <= 5; ++l) {
      const auto omega = pcr_embedding(x, l);
      Eigen::FullPivLU<Matrix> lu(omega.values);
      lu.setThreshold(1e-8);
      CHECK(lu.rank() == l);
      const double dist = (omega.values - ols).norm();
      CHECK(dist <= previous);
      previous = dist;
    }
  }
  SUBCASE("errors") {
    const DesignMatrix x(Matrix::Identity(3, 3));
    CHECK(kind_of([&] { pcr_embedding(x, 0); }) == ErrorKind::RankOutOfRange);
    CHECK(kind_of([&] { pcr_embedding(x, 4); }) == ErrorKind::RankOutOfRange);
    Matrix rank_one = Matrix::Zero(3, 2);
    rank_one.col(0).setOnes();
    CHECK(kind_of([&] { pcr_embedding(DesignMatrix(rank_one), 2); }) == ErrorKind::SingularGram);
    CHECK(pcr_embedding(DesignMatrix(rank_one), 1).rank == 1);
  }
}

TEST_CASE("attention_weights") {
  CounterRng rng(7);
  const DesignMatrix keys(oracle::random_matrix(rng, 9, 3));
  const DesignMatrix queries(oracle::random_matrix(rng, 4, 3));

  SUBCASE("zero metric and softmax gives uniform weights") {
    const Matrix w = attention_weights(queries, keys, EmbeddingMatrix::zero(3), ActivationKind::softmax());
    CHECK((w.array() - 1.0 / 9.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("identity activation on the OLS hat matrix with intercept") {
    const auto x = DesignMatrix::with_intercept(oracle::random_matrix(rng, 20, 2));
    const Matrix w = attention_weights(x, x, ols_embedding(x), ActivationKind::identity());
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("normalized activations sit on the simplex") {
    const auto omega = EmbeddingMatrix::learned(Matrix::Identity(3, 3));
    for (auto g : {ActivationKind::softmax(), ActivationKind::softmax(3.0),
                   ActivationKind::normalized_relu(), ActivationKind::normalized_elu(0.5)}) {
      Matrix w;
      try {
        w = attention_weights(queries, keys, omega, g);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateRow);
        continue;
      }
      CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
      if (g.tag == ActivationTag::softmax) CHECK((w.array() > 0.0).all());
      if (g.tag == ActivationTag::normalized_relu) CHECK((w.array() >= 0.0).all());
    }
  }
  SUBCASE("softmax is shift invariant") {
    Matrix scores = oracle::random_matrix(rng, 3, 6);
    Matrix shifted = scores;
    shifted.row(1).array() += 123.0;
    apply_activation_rows(scores, ActivationKind::softmax());
    apply_activation_rows(shifted, ActivationKind::softmax());
    CHECK((scores - shifted).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("softmax survives huge scores") {
    Matrix scores(1, 3);
    scores << 1e308, 1e308, -1e308;
    apply_activation_rows(scores, ActivationKind::softmax());
    CHECK(scores(0, 0) == doctest::Approx(0.5));
    CHECK(scores(0, 2) == 0.0);
  }
  SUBCASE("ELU formula") {
    Matrix scores(1, 2);
    scores << 2.0, -1.0;
    apply_activation_rows(scores, ActivationKind::normalized_elu(2.0));
    const double neg = 2.0 * std::expm1(-1.0);
    CHECK(scores(0, 0) == doctest::Approx(2.0 / (2.0 + neg)));
    CHECK(scores(0, 1) == doctest::Approx(neg / (2.0 + neg)));
  }
  SUBCASE("ReLU row with no positive score is degenerate") {
    Matrix scores(1, 3);
    scores << -1.0, -2.0, 0.0;
    CHECK(kind_of([&] { apply_activation_rows(scores, ActivationKind::normalized_relu()); }) ==
          ErrorKind::DegenerateRow);
  }
  SUBCASE("temperature divides scores") {
    const auto omega = EmbeddingMatrix::learned(Matrix::Identity(3, 3));
    const Matrix raw = attention_weights(queries, keys, omega, ActivationKind::identity());
    ActivationKind half;
    half.temperature = 2.0;
    CHECK((attention_weights(queries, keys, omega, half) - raw / 2.0).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("dimension mismatch") {
    CHECK(kind_of([&] {
            attention_weights(queries, keys, EmbeddingMatrix::zero(2), ActivationKind::identity());
          }) == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("linear_attention_predict") {
  CounterRng rng(8);
  const Matrix x = oracle::random_matrix(rng, 30, 3);
  const Matrix q = oracle::random_matrix(rng, 8, 3);
  const Vector y = oracle::random_vector(rng, 30);

  SUBCASE("OLS embedding with identity equals direct OLS") {
    const Vector got = linear_attention_predict(DesignMatrix(q), DesignMatrix(x), y,
                                                ols_embedding(DesignMatrix(x)),
                                                ActivationKind::identity());
    CHECK(oracle::rel_err(got, Vector(q * oracle::ols_coefficients(x, y))) < 1e-8);
  }
  SUBCASE("softmax with zero metric predicts the mean") {
    const Vector got = linear_attention_predict(DesignMatrix(q), DesignMatrix(x), y,
                                                EmbeddingMatrix::zero(3), ActivationKind::softmax());
    CHECK((got.array() - y.mean()).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("softmax predictions of [0,1] outcomes stay in [0,1]") {
    Vector unit(30);
    for (int i = 0; i < 30; ++i) unit(i) = rng.uniform();
    const Vector got = linear_attention_predict(DesignMatrix(q), DesignMatrix(x), unit,
                                                EmbeddingMatrix::learned(5.0 * Matrix::Identity(3, 3)),
                                                ActivationKind::softmax());
    CHECK((got.array() >= 0.0).all());
    CHECK((got.array() <= 1.0).all());
    CHECK(got.minCoeff() >= unit.minCoeff());
    CHECK(got.maxCoeff() <= unit.maxCoeff());
  }
  SUBCASE("y length must match keys") {
    CHECK(kind_of([&] {
            linear_attention_predict(DesignMatrix(q), DesignMatrix(x), Vector::Ones(3),
                                     EmbeddingMatrix::zero(3), ActivationKind::softmax());
          }) == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("property: ridge attention equals closed-form ridge") {
  CounterRng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = static_cast<Eigen::Index>(1 + rng.next_u64() % 5);
    const auto n = p + 2 + static_cast<Eigen::Index>(rng.next_u64() % 30);
    const double lambda = std::exp(4.0 * rng.uniform() - 3.0);
    const Matrix x = oracle::random_matrix(rng, n, p);
    const Matrix q = oracle::random_matrix(rng, 4, p);
    const Vector y = oracle::random_vector(rng, n);
    const Matrix a = x.transpose() * x + lambda * Matrix::Identity(p, p);
    const Vector direct = q * a.ldlt().solve(x.transpose() * y);
    const Vector got = linear_attention_predict(DesignMatrix(q), DesignMatrix(x), y,
                                                ridge_embedding(DesignMatrix(x), lambda),
                                                ActivationKind::identity());
    CHECK(oracle::rel_err(got, direct) < 1e-8);
  }
}

TEST_CASE("EmbeddingMatrix::learned validates") {
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK(kind_of([&] { EmbeddingMatrix::learned(neg); }) == ErrorKind::InvalidArgument);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK(kind_of([&] { EmbeddingMatrix::learned(asym); }) == ErrorKind::NonSymmetric);
  CHECK(EmbeddingMatrix::learned(Matrix::Ones(2, 2)).rank == 1);
}

TEST_CASE("activation names round-trip") {
  for (auto tag : {ActivationTag::identity, ActivationTag::softmax, ActivationTag::normalized_relu,
                   ActivationTag::normalized_elu}) {
    CHECK(parse_activation(to_string(tag)) == tag);
  }
  CHECK(kind_of([] { parse_activation("tanh"); }) == ErrorKind::InvalidArgument);
}
