#include "attnreg/dgp.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "attnreg/csv.hpp"
#include "attnreg/error.hpp"
#include "attnreg/rng.hpp"

namespace attnreg::dgp {

std::string_view to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::linear: return "linear";
    case DgpKind::friedman1: return "friedman1";
    case DgpKind::friedman2: return "friedman2";
    case DgpKind::friedman3: return "friedman3";
    case DgpKind::rotated_sine: return "rotated_sine";
    case DgpKind::soft_radial: return "soft_radial";
  }
  return "linear";
}

DgpKind parse_kind(std::string_view name) {
  for (DgpKind k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown DGP '" + std::string(name) + "'");
}

double eval_f(const DgpSpec& spec, const Eigen::Ref<const Vector>& x) {
  if (x.size() != kDimension) {
    throw Error(ErrorKind::DimensionMismatch, "DGP input must have 5 entries");
  }
  constexpr double pi = std::numbers::pi;
  switch (spec.kind) {
    case DgpKind::linear:
      return 2.0 * (x(0) - 0.5) - (x(1) - 0.5) + 3.0 * (x(2) - 0.5) + 1.5 * (x(3) - 0.5) +
             0.5 * (x(4) - 0.5);
    case DgpKind::friedman1: {
      const double c = x(2) - 0.5;
      return 10.0 * std::sin(pi * x(0) * x(1)) + 20.0 * c * c + 10.0 * x(3) + 5.0 * x(4);
    }
    case DgpKind::friedman2:
      return std::sin(pi * (x(0) + x(1) + x(2))) + std::log1p(x(3) * x(3));
    case DgpKind::friedman3:
      return x(0) * x(1) + std::log(x(2) + x(3) + 2.0);
    case DgpKind::rotated_sine:
      return std::sin(3.0 * (x(0) + x(1) + x(2) + x(3)));
    case DgpKind::soft_radial:
      return 1.0 / (1.0 + 5.0 * (x.array() - 0.5).square().sum());
  }
  return 0.0;
}

bool in_support(const Eigen::Ref<const Vector>& x) {
  return (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
}

namespace {

Matrix uniform_design(int n, std::uint64_t key) {
  CounterRng rng(key);
  Matrix x(n, kDimension);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kDimension; ++j) x(i, j) = rng.uniform();
  }
  return x;
}

Vector standard_normals(int n, std::uint64_t key) {
  CounterRng rng(key);
  Vector z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

Vector evaluate_rows(const DgpSpec& spec, const Matrix& x) {
  Vector f(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) f(i) = eval_f(spec, x.row(i).transpose());
  return f;
}

double sample_variance(const Vector& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

SimulatedDataset generate(const DgpSpec& spec, int n, double snr, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "need n >= 2 to calibrate noise");
  if (!(snr > 0.0) || !std::isfinite(snr)) {
    throw Error(ErrorKind::InvalidArgument, "snr must be positive and finite");
  }
  SimulatedDataset out;
  out.seed = seed;
  out.snr = snr;
  out.x = uniform_design(n, derive_seed({seed, 0}));
  out.signal = evaluate_rows(spec, out.x);
  const double var_f = sample_variance(out.signal);
  if (var_f < kDegenerateSignalTol) {
    throw Error(ErrorKind::DegenerateSignal, "signal variance too small to calibrate noise");
  }
  out.noise_variance = var_f / snr;
  out.y = out.signal + std::sqrt(out.noise_variance) * standard_normals(n, derive_seed({seed, 1}));
  return out;
}

Vector TestDraw::noisy_outcomes(double noise_variance) const {
  return signal + std::sqrt(noise_variance) * standard_noise;
}

TestDraw generate_test(const DgpSpec& spec, int n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "test set needs n >= 2");
  TestDraw out;
  out.x = uniform_design(n, derive_seed({seed, 0}));
  out.signal = evaluate_rows(spec, out.x);
  out.standard_noise = standard_normals(n, derive_seed({seed, 1}));
  return out;
}

double r2_max(double snr) {
  if (!(snr > 0.0)) throw Error(ErrorKind::InvalidArgument, "snr must be positive");
  return snr / (snr + 1.0);
}

void write_csv(std::ostream& out, const SimulatedDataset& data) {
  out << "x1,x2,x3,x4,x5,y,signal\n";
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (int j = 0; j < kDimension; ++j) out << csv::format_double(data.x(i, j)) << ',';
    out << csv::format_double(data.y(i)) << ',' << csv::format_double(data.signal(i)) << '\n';
  }
}

}  // namespace attnreg::dgp
