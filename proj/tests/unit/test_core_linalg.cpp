#include <doctest.h>

#include "attnreg/core_linalg.hpp"
#include "attnreg/error.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace attnreg;

TEST_CASE("spectral_embedding of the identity") {
  const auto emb = spectral_embedding(Matrix::Identity(2, 2));
  CHECK(emb.eigenvalues.isApprox(Vector::Ones(2)));
  CHECK((emb.embedding.transpose() * emb.embedding - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((emb.eigenvectors.cwiseAbs() - Matrix::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("spectral_embedding of diag(4, 1)") {
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 4.0;
  g(1, 1) = 1.0;
  const auto emb = spectral_embedding(g);
  CHECK(emb.eigenvalues(0) == doctest::Approx(4.0));
  CHECK(emb.eigenvalues(1) == doctest::Approx(1.0));
  // Sign convention makes the dominant entry positive, so W is exactly diag(1/2, 1).
  CHECK(emb.embedding(0, 0) == doctest::Approx(0.5));
  CHECK(emb.embedding(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(emb.embedding(0, 1)) < 1e-15);
  CHECK(std::abs(emb.embedding(1, 0)) < 1e-15);
}

TEST_CASE("spectral_embedding whitens a random gram") {
  CounterRng rng(11);
  const Matrix a = oracle::random_matrix(rng, 10, 3);
  const Matrix g = a.transpose() * a;
  const auto emb = spectral_embedding(g);
  const Matrix wgw = emb.embedding.transpose() * g * emb.embedding;
  CHECK((wgw - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((emb.eigenvectors.transpose() * emb.eigenvectors - Matrix::Identity(3, 3)).norm() < 1e-10);
  const Matrix recon = emb.eigenvectors * emb.eigenvalues.asDiagonal() * emb.eigenvectors.transpose();
  CHECK(oracle::rel_err(recon, g) < 1e-8);
  for (int k = 0; k + 1 < 3; ++k) CHECK(emb.eigenvalues(k) >= emb.eigenvalues(k + 1));
  for (int k = 0; k < 3; ++k) {
    Eigen::Index arg = 0;
    emb.eigenvectors.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(emb.eigenvectors(arg, k) > 0.0);
  }
}

TEST_CASE("spectral_embedding errors") {
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK(kind_of([&] { spectral_embedding(asym); }) == ErrorKind::NonSymmetric);

  Matrix singular = Matrix::Ones(2, 2);
  CHECK(kind_of([&] { spectral_embedding(singular); }) == ErrorKind::SingularGram);
}

TEST_CASE("factor_scores") {
  SUBCASE("identity design") {
    const DesignMatrix x(Matrix::Identity(3, 3));
    const auto f = factor_scores(x, spectral_embedding(Matrix::Identity(3, 3)));
    CHECK((f.values.cwiseAbs() - Matrix::Identity(3, 3)).norm() < 1e-14);
  }
  SUBCASE("training scores are orthonormal, test scores are not") {
    CounterRng rng(5);
    const DesignMatrix train(oracle::random_matrix(rng, 20, 3));
    const DesignMatrix test(oracle::random_matrix(rng, 5, 3));
    const auto emb = spectral_embedding(train.gram());
    const auto f_train = factor_scores(train, emb, ScoreOrigin::train);
    CHECK((f_train.values.transpose() * f_train.values - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-8);
    const auto f_test = factor_scores(test, emb, ScoreOrigin::test);
    CHECK(f_test.origin == ScoreOrigin::test);
    CHECK(f_test.values.allFinite());
  }
  SUBCASE("dimension mismatch") {
    const DesignMatrix x(Matrix::Ones(4, 2));
    CHECK(kind_of([&] { factor_scores(x, spectral_embedding(Matrix::Identity(3, 3))); }) ==
          ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("ols_fit") {
  SUBCASE("exact fit through the origin") {
    Matrix x(2, 1);
    x << 1, 2;
    Vector y(2);
    y << 1, 2;
    CHECK(ols_fit(DesignMatrix(x), y).coefficients(0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("intercept only gives the mean") {
    Vector y(4);
    y << 1, 2, 3, 4;
    CHECK(ols_fit(DesignMatrix(Matrix::Ones(4, 1), true), y).coefficients(0) ==
          doctest::Approx(2.5).epsilon(1e-14));
  }
  SUBCASE("matches an independent QR solve") {
    CounterRng rng(99);
    const Matrix x = oracle::random_matrix(rng, 50, 4);
    const Vector y = oracle::random_vector(rng, 50);
    const auto fit = ols_fit(DesignMatrix(x), y);
    CHECK(oracle::rel_err(fit.coefficients, oracle::ols_coefficients(x, y)) < 1e-10);
    const Vector normal_residual = fit.gram * fit.coefficients - x.transpose() * y;
    CHECK(normal_residual.norm() / (x.transpose() * y).norm() < 1e-8);
  }
  SUBCASE("errors") {
    CHECK(kind_of([] { ols_fit(DesignMatrix(Matrix::Ones(3, 2)), Vector::Ones(3)); }) ==
          ErrorKind::SingularGram);
    CHECK(kind_of([] { ols_fit(DesignMatrix(Matrix::Ones(1, 2)), Vector::Ones(1)); }) ==
          ErrorKind::SingularGram);
    CHECK(kind_of([] { ols_fit(DesignMatrix(Matrix::Identity(3, 3)), Vector::Ones(2)); }) ==
          ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("ols_predict_attention") {
  SUBCASE("toy") {
    Matrix x(2, 1);
    x << 1, 2;
    Vector y(2);
    y << 1, 2;
    Matrix q(1, 1);
    q << 3;
    const auto out = ols_predict_attention(DesignMatrix(q), DesignMatrix(x), y);
    CHECK(out.predictions(0) == doctest::Approx(3.0).epsilon(1e-14));
    // F_test F_train' = 3 [1 2] / 5
    CHECK(out.weights.values(0, 0) == doctest::Approx(0.6));
    CHECK(out.weights.values(0, 1) == doctest::Approx(1.2));
  }
  SUBCASE("equals direct OLS on random data") {
    CounterRng rng(3);
    const Matrix x = oracle::random_matrix(rng, 30, 3);
    const Matrix q = oracle::random_matrix(rng, 7, 3);
    const Vector y = oracle::random_vector(rng, 30);
    const auto out = ols_predict_attention(DesignMatrix(q), DesignMatrix(x), y);
    CHECK(oracle::rel_err(out.predictions, Vector(q * oracle::ols_coefficients(x, y))) < 1e-10);
  }
  SUBCASE("hat-matrix rows sum to one with an intercept") {
    CounterRng rng(8);
    const DesignMatrix x = DesignMatrix::with_intercept(oracle::random_matrix(rng, 25, 3));
    const auto out = ols_predict_attention(x, x, oracle::random_vector(rng, 25));
    const Vector sums = out.weights.values.rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-8);
    // Symmetry of ω between observations.
    CHECK((out.weights.values - out.weights.values.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("weights are inner products of factor scores") {
    CounterRng rng(13);
    const DesignMatrix x(oracle::random_matrix(rng, 12, 2));
    const DesignMatrix q(oracle::random_matrix(rng, 4, 2));
    const auto out = ols_predict_attention(q, x, oracle::random_vector(rng, 12));
    const auto emb = spectral_embedding(x.gram());
    const Matrix ft = factor_scores(x, emb).values;
    const Matrix fq = factor_scores(q, emb, ScoreOrigin::test).values;
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 12; ++i)
        CHECK(std::abs(out.weights.values(j, i) - fq.row(j).dot(ft.row(i))) < 1e-10);
  }
}

TEST_CASE("property: attention form equals OLS on random instances") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = static_cast<Eigen::Index>(1 + rng.next_u64() % 6);
    const auto n = p + 1 + static_cast<Eigen::Index>(rng.next_u64() % 40);
    const Matrix x = oracle::random_matrix(rng, n, p);
    const Matrix q = oracle::random_matrix(rng, 5, p);
    const Vector y = oracle::random_vector(rng, n);
    const auto out = ols_predict_attention(DesignMatrix(q), DesignMatrix(x), y);
    CHECK(oracle::rel_err(out.predictions, Vector(q * oracle::ols_coefficients(x, y))) < 1e-8);
  }
}

TEST_CASE("weight_decomposition") {
  auto vec = [](double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
  };
  auto d = weight_decomposition(vec(1, 0), vec(0, 1));
  CHECK(d.cosine == 0.0);
  CHECK(d.weight == 0.0);
  d = weight_decomposition(vec(1, 0), vec(1, 0));
  CHECK(d.scale == 1.0);
  CHECK(d.cosine == 1.0);
  CHECK(d.weight == 1.0);
  d = weight_decomposition(vec(3, 4), vec(3, 4));
  CHECK(d.scale == doctest::Approx(25.0));
  CHECK(d.cosine == doctest::Approx(1.0));
  CHECK(d.weight == doctest::Approx(25.0));
  d = weight_decomposition(vec(0, 0), vec(3, 4));
  CHECK(d.cosine == 0.0);
  CHECK(d.weight == 0.0);

  CounterRng rng(77);
  for (int t = 0; t < 200; ++t) {
    const Vector a = oracle::random_vector(rng, 4);
    const Vector b = oracle::random_vector(rng, 4);
    const auto r = weight_decomposition(a, b);
    CHECK(std::abs(r.scale * r.cosine - a.dot(b)) <= 1e-12 * std::max(1.0, r.scale));
  }
}

TEST_CASE("DesignMatrix rejects non-finite and empty input") {
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 0) = std::nan("");
  CHECK(kind_of([&] { DesignMatrix d(bad); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { DesignMatrix d(Matrix(0, 2)); }) == ErrorKind::InvalidArgument);
  const auto with = DesignMatrix::with_intercept(Matrix::Zero(3, 2));
  CHECK(with.has_intercept());
  CHECK(with.cols() == 3);
  CHECK(with.values().col(0).isOnes());
}
