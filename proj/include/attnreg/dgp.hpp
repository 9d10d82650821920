#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "attnreg/core_linalg.hpp"

namespace attnreg::dgp {

enum class DgpKind { linear, friedman1, friedman2, friedman3, rotated_sine, soft_radial };

inline constexpr std::array<DgpKind, 6> kAllKinds = {
    DgpKind::linear,    DgpKind::friedman1,    DgpKind::friedman2,
    DgpKind::friedman3, DgpKind::rotated_sine, DgpKind::soft_radial};

inline constexpr int kDimension = 5;

struct DgpSpec {
  DgpKind kind = DgpKind::linear;
  int dimension() const noexcept { return kDimension; }
};

std::string_view to_string(DgpKind kind);
DgpKind parse_kind(std::string_view name);

struct SimulatedDataset {
  Matrix x;  // N x 5, entries in [0, 1)
  Vector y;
  Vector signal;
  double noise_variance = 0.0;
  double snr = 0.0;
  std::uint64_t seed = 0;
};

/// Total on R^5; inputs outside the unit cube are evaluated as given; callers
/// that care can check `in_support`.
double eval_f(const DgpSpec& spec, const Eigen::Ref<const Vector>& x);
bool in_support(const Eigen::Ref<const Vector>& x);

/// Signal variance below this cannot be calibrated.
inline constexpr double kDegenerateSignalTol = 1e-12;

/// N rows from Uniform[0,1]^5, noise variance = sample variance of f (n - 1
/// denominator) / snr. Deterministic in (spec, n, snr, seed).
SimulatedDataset generate(const DgpSpec& spec, int n, double snr, std::uint64_t seed);

/// Covariates and standard-normal noise draws of a test set; the caller
/// scales the noise with the training variance (see `noisy_outcomes`).
struct TestDraw {
  Matrix x;
  Vector signal;
  Vector standard_noise;

  Vector noisy_outcomes(double noise_variance) const;
};

TestDraw generate_test(const DgpSpec& spec, int n, std::uint64_t seed);

double r2_max(double snr);

/// Writes columns x1..x5, y, signal with a header row at 17 significant digits.
void write_csv(std::ostream& out, const SimulatedDataset& data);

}  // namespace attnreg::dgp
