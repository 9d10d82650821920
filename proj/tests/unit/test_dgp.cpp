#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "attnreg/dgp.hpp"
#include "attnreg/rng.hpp"
#include "helpers.hpp"

using namespace attnreg;
using dgp::DgpKind;
using dgp::DgpSpec;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent transcription of the six regression functions.
double reference_f(DgpKind kind, const Vector& x) {
  switch (kind) {
    case DgpKind::linear:
      return 2 * (x(0) - 0.5) - (x(1) - 0.5) + 3 * (x(2) - 0.5) + 1.5 * (x(3) - 0.5) +
             0.5 * (x(4) - 0.5);
    case DgpKind::friedman1:
      return 10 * std::sin(kPi * x(0) * x(1)) + 20 * std::pow(x(2) - 0.5, 2) + 10 * x(3) + 5 * x(4);
    case DgpKind::friedman2:
      return std::sin(kPi * (x(0) + x(1) + x(2))) + std::log(1 + x(3) * x(3));
    case DgpKind::friedman3:
      return x(0) * x(1) + std::log(x(2) + x(3) + 2);
    case DgpKind::rotated_sine:
      return std::sin(3 * (x(0) + x(1) + x(2) + x(3)));
    case DgpKind::soft_radial:
      return 1.0 / (1.0 + 5.0 * (x.array() - 0.5).square().sum());
  }
  return NAN;
}

double sample_variance(const Vector& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

Vector center() { return Vector::Constant(5, 0.5); }

}  // namespace

TEST_CASE("eval_f at the center of the cube") {
  CHECK(dgp::eval_f({DgpKind::linear}, center()) == 0.0);
  CHECK(dgp::eval_f({DgpKind::soft_radial}, center()) == 1.0);
  const double f1 = dgp::eval_f({DgpKind::friedman1}, center());
  CHECK(f1 == doctest::Approx(10 * std::sin(kPi / 4) + 7.5).epsilon(1e-14));
  CHECK(f1 == doctest::Approx(14.5711).epsilon(1e-5));
}

TEST_CASE("eval_f matches the reference formulas") {
  CounterRng rng(42);
  for (auto kind : dgp::kAllKinds) {
    for (int t = 0; t < 200; ++t) {
      Vector x(5);
      for (int j = 0; j < 5; ++j) x(j) = rng.uniform();
      CHECK(dgp::eval_f({kind}, x) == doctest::Approx(reference_f(kind, x)).epsilon(1e-13));
    }
  }
}

TEST_CASE("eval_f is total and flags points outside the cube") {
  Vector x(5);
  x << -3.0, 2.0, 7.5, -0.1, 1.2;
  CHECK_FALSE(dgp::in_support(x));
  for (auto kind : dgp::kAllKinds) {
    CHECK(dgp::eval_f({kind}, x) == doctest::Approx(reference_f(kind, x)).epsilon(1e-13));
  }
  CHECK(dgp::in_support(center()));
  CHECK(kind_of([] { dgp::eval_f({DgpKind::linear}, Vector::Zero(4)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("kind names round-trip") {
  for (auto kind : dgp::kAllKinds) CHECK(dgp::parse_kind(dgp::to_string(kind)) == kind);
  CHECK(kind_of([] { dgp::parse_kind("friedman4"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("generate") {
  SUBCASE("same arguments give bitwise identical data") {
    for (auto kind : dgp::kAllKinds) {
      const auto a = dgp::generate({kind}, 200, 2.0, 7);
      const auto b = dgp::generate({kind}, 200, 2.0, 7);
      CHECK(a.x == b.x);
      CHECK(a.y == b.y);
      CHECK(a.noise_variance == b.noise_variance);
      const auto c = dgp::generate({kind}, 200, 2.0, 8);
      CHECK(a.x != c.x);
    }
  }
  SUBCASE("structure, support and calibration identity") {
    for (auto kind : dgp::kAllKinds) {
      for (double snr : {0.5, 1.0, 2.0, 3.0}) {
        const auto d = dgp::generate({kind}, 300, snr, 11);
        REQUIRE(d.x.rows() == 300);
        REQUIRE(d.x.cols() == 5);
        CHECK(d.x.minCoeff() >= 0.0);
        CHECK(d.x.maxCoeff() <= 1.0);
        for (int i = 0; i < 300; ++i) CHECK(d.signal(i) == dgp::eval_f({kind}, d.x.row(i).transpose()));
        const double var = sample_variance(d.signal);
        CHECK(std::abs(d.noise_variance * snr - var) <= 1e-12 * std::max(1.0, var));
        CHECK(d.snr == snr);
      }
    }
  }
  SUBCASE("large sample noise-to-signal ratio and mean-zero noise") {
    const int n = 100000;
    const auto d = dgp::generate({DgpKind::linear}, n, 2.0, 2025);
    const Vector eps = d.y - d.signal;
    CHECK(sample_variance(eps) / sample_variance(d.signal) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::abs(eps.mean()) < 4.0 * std::sqrt(d.noise_variance) / std::sqrt(double(n)));
  }
  SUBCASE("vanishing noise") {
    const auto d = dgp::generate({DgpKind::friedman1}, 500, 1e9, 3);
    const double range = d.signal.maxCoeff() - d.signal.minCoeff();
    CHECK((d.y - d.signal).cwiseAbs().maxCoeff() < 1e-3 * range);
  }
  SUBCASE("argument errors") {
    CHECK(kind_of([] { dgp::generate({DgpKind::linear}, 1, 1.0, 0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { dgp::generate({DgpKind::linear}, 10, 0.0, 0); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { dgp::generate({DgpKind::linear}, 10, -1.0, 0); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("test draws") {
  const auto t = dgp::generate_test({DgpKind::friedman2}, 1000, 5);
  const auto u = dgp::generate_test({DgpKind::friedman2}, 1000, 5);
  CHECK(t.x == u.x);
  CHECK(t.standard_noise == u.standard_noise);
  CHECK(t.x.rows() == 1000);
  const Vector y = t.noisy_outcomes(4.0);
  CHECK(y == t.signal + 2.0 * t.standard_noise);
  CHECK(sample_variance(t.standard_noise) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("r2_max") {
  CHECK(dgp::r2_max(1.0) == 0.5);
  CHECK(dgp::r2_max(3.0) == 0.75);
  CHECK(dgp::r2_max(0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(kind_of([] { dgp::r2_max(0.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("CSV export") {
  const auto d = dgp::generate({DgpKind::friedman3}, 4, 1.0, 1);
  std::ostringstream out;
  dgp::write_csv(out, d);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x1,x2,x3,x4,x5,y,signal");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(cells, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 7);
    for (int j = 0; j < 5; ++j) CHECK(vals[static_cast<size_t>(j)] == d.x(rows, j));
    CHECK(vals[5] == d.y(rows));
    CHECK(vals[6] == d.signal(rows));
    ++rows;
  }
  CHECK(rows == 4);
}
